//! From a convex potential to a diffeomorphism whose pullback metric is its
//! Hessian, and back.
//!
//! Forward: pick a square root `S` of `Φ″`, check that its rows are closed
//! 1-forms, integrate them. Backward: integrate the metric `g = JᵗJ` once to
//! get a gradient field `A`, integrate `A` to get `Φ`, both along the
//! coordinate staircase from a base point.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::maps::{newton_inverse, ConvexPotential, DerivativeSources, DiffeoMap, Domain, Source, DEFAULT_SEED};
use crate::numerics::{self, fd_steps, path_line_integral, spd_sqrt, Path, SquareRootKind, Tolerances};
use crate::report::{Check, MaxDev};
use crate::Point;

/// Violation above which a construction is refused.
pub const INTEGRABILITY_THRESHOLD: f64 = 1e-3;
/// Allowed `‖Φ″ − JᵗJ‖∞` for a map built from a potential.
pub const FACTORIZATION_TOLERANCE: f64 = 1e-4;
/// Slack on the bound `‖S⁻¹‖ ≤ 1/√a`.
pub const INVERSE_BOUND_SLACK: f64 = 1e-9;

const CHECK_SAMPLES: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    pub kind: SquareRootKind,
    /// `max |∂S_ij/∂x_k − ∂S_ik/∂x_j|`.
    pub curl_violation: f64,
    pub curl_ok: bool,
    pub min_singular_value: f64,
    pub min_abs_det: f64,
    pub jacobian_invertible_ok: bool,
    /// `max ‖S⁻¹‖` over the samples.
    pub max_inverse_norm: f64,
    /// `1/√a` when the potential declares an eigenvalue floor `a`.
    pub inverse_norm_bound: Option<f64>,
    pub inverse_bound_ok: Option<bool>,
    /// `max ‖SᵗS − Φ″‖∞`.
    pub factorization_deviation: f64,
    pub threshold: f64,
    pub sample_points: Vec<Vec<f64>>,
}

impl FactorizationReport {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.curl_ok = self.curl_violation <= threshold;
        self
    }

    pub fn passed(&self) -> bool {
        self.curl_ok && self.jacobian_invertible_ok && self.inverse_bound_ok.unwrap_or(true)
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = vec![
            Check::new("sqrt_curl_condition", self.curl_violation, self.threshold),
            Check::new("sqrt_factorization", self.factorization_deviation, FACTORIZATION_TOLERANCE),
            Check::verdict(
                "sqrt_invertible",
                self.min_singular_value,
                0.0,
                self.jacobian_invertible_ok,
            ),
        ];
        if let (Some(bound), Some(ok)) = (self.inverse_norm_bound, self.inverse_bound_ok) {
            out.push(Check::verdict(
                "sqrt_inverse_norm_bound",
                (self.max_inverse_norm - bound).max(0.0),
                INVERSE_BOUND_SLACK,
                ok,
            ));
        }
        out
    }
}

fn sqrt_at(pot: &dyn ConvexPotential, kind: SquareRootKind, x: &Point, tol: &Tolerances) -> Result<DMatrix<f64>> {
    spd_sqrt(&pot.hessian(x)?, kind, tol.spd_eig_floor)
}

pub fn check_sqrt_integrability(
    potential: &dyn ConvexPotential,
    kind: SquareRootKind,
    sample_points: &[Point],
    tol: &Tolerances,
) -> Result<FactorizationReport> {
    if sample_points.is_empty() {
        return Err(GeoError::EmptyInput("no sample points"));
    }
    let n = potential.dim();
    let mut curl = MaxDev::default();
    let mut fact = MaxDev::default();
    let mut inv_norm = MaxDev::default();
    let (mut min_sv, mut min_det) = (f64::INFINITY, f64::INFINITY);

    for x in sample_points {
        potential.domain().ensure(x, "factorization sample")?;
        let s = sqrt_at(potential, kind, x, tol)?;
        fact.add((s.transpose() * &s - potential.hessian(x)?).amax());
        let sv = s.singular_values();
        let smallest = sv.min();
        min_sv = min_sv.min(smallest);
        min_det = min_det.min(s.determinant().abs());
        inv_norm.add(1.0 / smallest);

        let h = fd_steps(x, tol.fd_step);
        let mut ds = Vec::with_capacity(n);
        let mut probe = x.clone();
        for k in 0..n {
            probe[k] = x[k] + h[k];
            let sp = sqrt_at(potential, kind, &probe, tol)?;
            probe[k] = x[k] - h[k];
            let sm = sqrt_at(potential, kind, &probe, tol)?;
            probe[k] = x[k];
            ds.push((sp - sm) / (2.0 * h[k]));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    curl.add((ds[k][(i, j)] - ds[j][(i, k)]).abs());
                }
            }
        }
    }

    let bound = potential.eigen_floor().map(|a| 1.0 / a.sqrt());
    let report = FactorizationReport {
        kind,
        curl_violation: curl.get(),
        curl_ok: false,
        min_singular_value: min_sv,
        min_abs_det: min_det,
        jacobian_invertible_ok: min_sv > 0.0 && min_sv.is_finite(),
        max_inverse_norm: inv_norm.get(),
        inverse_norm_bound: bound,
        inverse_bound_ok: bound.map(|b| inv_norm.get() <= b + INVERSE_BOUND_SLACK),
        factorization_deviation: fact.get(),
        threshold: INTEGRABILITY_THRESHOLD,
        sample_points: sample_points.iter().map(|p| p.as_slice().to_vec()).collect(),
    };
    Ok(report.with_threshold(INTEGRABILITY_THRESHOLD))
}

fn check_samples(domain: &Domain, base: &Point) -> Vec<Point> {
    let mut pts = domain.sample_points(CHECK_SAMPLES, DEFAULT_SEED);
    pts.push(base.clone());
    pts
}

/// `U(x) = ∫ S(γ) γ̇ ds` along the straight segment from the base point.
pub struct PotentialMap {
    potential: Arc<dyn ConvexPotential>,
    kind: SquareRootKind,
    base: Point,
    tol: Tolerances,
    report: FactorizationReport,
}

impl PotentialMap {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn report(&self) -> &FactorizationReport {
        &self.report
    }

    pub fn potential(&self) -> &Arc<dyn ConvexPotential> {
        &self.potential
    }

    /// The same line integral along an arbitrary path from the base point.
    pub fn integrate_along(&self, path: &Path) -> Result<DVector<f64>> {
        let pot = &*self.potential;
        path_line_integral(
            |p| {
                pot.domain().ensure(p, "integration path")?;
                sqrt_at(pot, self.kind, p, &self.tol)
            },
            path,
            self.tol.quad_points,
        )
    }
}

impl DiffeoMap for PotentialMap {
    fn name(&self) -> String {
        format!("sqrt_map({})", self.potential.name())
    }

    fn domain(&self) -> &Domain {
        self.potential.domain()
    }

    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain().ensure(x, "map argument")?;
        self.integrate_along(&Path::straight(&self.base, x))
    }

    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain().ensure(x, "map argument")?;
        sqrt_at(&*self.potential, self.kind, x, &self.tol)
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        newton_inverse(self, y, &self.base, &self.tol)
    }

    fn sources(&self) -> DerivativeSources {
        DerivativeSources {
            jacobian: Source::Analytic,
            second: Source::FiniteDifference,
            inverse: Source::Newton,
        }
    }
}

/// Builds `U` with Jacobian `S = √Φ″` and `U(base) = 0`, after checking
/// the curl condition and the factorization at seeded samples.
pub fn potential_to_map(
    potential: Arc<dyn ConvexPotential>,
    kind: SquareRootKind,
    base_point: &Point,
    tol: &Tolerances,
) -> Result<PotentialMap> {
    tol.validate()?;
    let domain = potential.domain();
    domain.ensure(base_point, "base point")?;
    if !domain.is_convex() {
        return Err(GeoError::invalid("potential", "domain must be convex"));
    }
    let samples = check_samples(domain, base_point);
    let report = check_sqrt_integrability(&*potential, kind, &samples, tol)?;
    if !report.curl_ok {
        return Err(GeoError::IntegrabilityFailed {
            check: "check_sqrt_integrability",
            violation: report.curl_violation,
            threshold: report.threshold,
        });
    }
    if !(report.factorization_deviation <= FACTORIZATION_TOLERANCE) {
        return Err(GeoError::FactorizationMismatch { deviation: report.factorization_deviation });
    }
    Ok(PotentialMap {
        potential,
        kind,
        base: base_point.clone(),
        tol: *tol,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    /// `max |Σ_m U^m_{ki} U^m_j − Σ_m U^m_{ij} U^m_k|`.
    pub condition_violation: f64,
    pub condition_ok: bool,
    pub symmetry_violation: f64,
    pub symmetry_ok: bool,
    pub threshold: f64,
    pub sample_points: Vec<Vec<f64>>,
}

impl IntegrabilityReport {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.condition_ok = self.condition_violation <= threshold;
        self
    }

    pub fn passed(&self) -> bool {
        self.condition_ok && self.symmetry_ok
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::new("check_map_integrability", self.condition_violation, self.threshold),
            Check::new("metric_symmetry", self.symmetry_violation, 1e-12),
        ]
    }
}

pub fn check_map_integrability(
    map: &dyn DiffeoMap,
    sample_points: &[Point],
    _tol: &Tolerances,
) -> Result<IntegrabilityReport> {
    if sample_points.is_empty() {
        return Err(GeoError::EmptyInput("no sample points"));
    }
    let n = map.dim();
    let (mut cond, mut sym) = (MaxDev::default(), MaxDev::default());
    for x in sample_points {
        map.domain().ensure(x, "integrability sample")?;
        let j = map.jacobian(x)?;
        let hs = map.second_derivs(x)?;
        let g = j.transpose() * &j;
        sym.add((&g - g.transpose()).amax());
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    let (mut lhs, mut rhs) = (0.0, 0.0);
                    for m in 0..n {
                        lhs += hs[m][(k, i)] * j[(m, jj)];
                        rhs += hs[m][(i, jj)] * j[(m, k)];
                    }
                    cond.add((lhs - rhs).abs());
                }
            }
        }
    }
    let report = IntegrabilityReport {
        condition_violation: cond.get(),
        condition_ok: false,
        symmetry_violation: sym.get(),
        symmetry_ok: sym.get() <= 1e-12,
        threshold: INTEGRABILITY_THRESHOLD,
        sample_points: sample_points.iter().map(|p| p.as_slice().to_vec()).collect(),
    };
    Ok(report.with_threshold(INTEGRABILITY_THRESHOLD))
}

/// `Φ` with `Φ″ = JᵗJ`, built by two staircase integrations from the base
/// point with `A(base) = 0` and `Φ(base) = 0`.
pub struct StaircasePotential {
    map: Arc<dyn DiffeoMap>,
    base: Point,
    tol: Tolerances,
    report: IntegrabilityReport,
}

impl StaircasePotential {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn report(&self) -> &IntegrabilityReport {
        &self.report
    }

    fn metric(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.map.domain().ensure(x, "integration path")?;
        let j = self.map.jacobian(x)?;
        let g = j.transpose() * j;
        Ok((&g + g.transpose()) * 0.5)
    }

    /// `A^i(x) = Σ_k ∫ g_ik dξ_k` along the staircase.
    pub fn gradient_field(&self, x: &Point) -> Result<DVector<f64>> {
        path_line_integral(|p| self.metric(p), &Path::staircase(&self.base, x), self.tol.quad_points)
    }

    /// `A` integrated along the straight segment instead.
    pub fn gradient_field_straight(&self, x: &Point) -> Result<DVector<f64>> {
        path_line_integral(|p| self.metric(p), &Path::straight(&self.base, x), self.tol.quad_points)
    }
}

impl ConvexPotential for StaircasePotential {
    fn name(&self) -> String {
        format!("staircase_potential({})", self.map.name())
    }

    fn domain(&self) -> &Domain {
        self.map.domain()
    }

    fn value(&self, x: &Point) -> Result<f64> {
        self.domain().ensure(x, "potential argument")?;
        let phi = path_line_integral(
            |p| {
                let a = self.gradient_field(p)?;
                Ok(DMatrix::from_row_slice(1, a.len(), a.as_slice()))
            },
            &Path::staircase(&self.base, x),
            self.tol.quad_points,
        )?;
        Ok(phi[0])
    }

    fn gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain().ensure(x, "potential argument")?;
        self.gradient_field(x)
    }

    fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.metric(x)
    }
}

/// Builds `Φ` from `U` after checking the integrability condition at seeded
/// samples. The domain must be a product of intervals so that every
/// staircase from the base point stays inside.
pub fn map_to_potential(map: Arc<dyn DiffeoMap>, base_point: &Point, tol: &Tolerances) -> Result<StaircasePotential> {
    tol.validate()?;
    let domain = map.domain();
    domain.ensure(base_point, "base point")?;
    if domain.bounds().is_none() {
        return Err(GeoError::invalid("map", "domain must be a product of intervals"));
    }
    let samples = check_samples(domain, base_point);
    let report = check_map_integrability(&*map, &samples, tol)?;
    if !report.condition_ok {
        return Err(GeoError::IntegrabilityFailed {
            check: "check_map_integrability",
            violation: report.condition_violation,
            threshold: report.threshold,
        });
    }
    Ok(StaircasePotential {
        map,
        base: base_point.clone(),
        tol: *tol,
        report,
    })
}

/// `max ‖Φ″ − JᵗJ‖∞` over the points.
pub fn factorization_deviation(
    potential: &dyn ConvexPotential,
    map: &dyn DiffeoMap,
    points: &[Point],
) -> Result<f64> {
    let mut dev = MaxDev::default();
    for x in points {
        let j = map.jacobian(x)?;
        dev.add((potential.hessian(x)? - j.transpose() * j).amax());
    }
    Ok(dev.get())
}

/// `max ‖∇²Φ_fd − Φ″_ref‖∞` with the Hessian of `potential` taken by finite
/// differences of its values.
pub fn fd_hessian_deviation(
    potential: &dyn ConvexPotential,
    reference: &dyn ConvexPotential,
    points: &[Point],
    tol: &Tolerances,
) -> Result<f64> {
    let mut dev = MaxDev::default();
    for x in points {
        let fd = numerics::fd_hessian(|p| potential.value(p), x, tol)?;
        dev.add((fd - reference.hessian(x)?).amax());
    }
    Ok(dev.get())
}
