//! Legendre duality: the conjugate `Φ*`, the dual factorization
//! `U* = U∘(∇Φ)⁻¹`, and the transport of geodesics and distances through
//! `∇Φ`.
//!
//! Dual-side points live in the range of `∇Φ`, which for most catalog
//! potentials is a proper subset of `ℝⁿ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::{geodesic_closed_form, geodesic_distance};
use crate::maps::{ConvexPotential, DerivativeSources, DiffeoMap, Domain, Source};
use crate::numerics::{self, newton_solve, Tolerances};
use crate::report::{Check, MaxDev};
use crate::Point;

/// Relative finite-difference step for second differences of conjugate
/// values.
pub const CONJUGATE_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMode {
    /// Closed-form `(∇Φ)⁻¹` when the potential has one, Newton otherwise.
    Analytic,
    /// Always Newton.
    Newton,
}

/// `(∇Φ)⁻¹(ξ)`, after checking that `ξ` lies in the gradient range.
pub fn gradient_inverse(
    potential: &dyn ConvexPotential,
    xi: &DVector<f64>,
    mode: InverseMode,
    tol: &Tolerances,
) -> Result<Point> {
    potential.gradient_range().ensure(xi, "range of the gradient")?;
    if mode == InverseMode::Analytic {
        if let Some(r) = potential.gradient_inverse(xi) {
            return r;
        }
    }
    let start = potential.domain().center();
    let x = newton_solve(|x| Ok(potential.gradient(x)? - xi), |x| potential.hessian(x), &start, tol)
        .map_err(|_| GeoError::outside(xi.as_slice(), "range of the gradient (Newton did not converge)"))?;
    potential.domain().ensure(&x, "gradient preimage")?;
    Ok(x)
}

fn conjugate_with(potential: &dyn ConvexPotential, xi: &DVector<f64>, mode: InverseMode, tol: &Tolerances) -> Result<f64> {
    let x = gradient_inverse(potential, xi, mode, tol)?;
    Ok(xi.dot(&x) - potential.value(&x)?)
}

/// `Φ*(ξ) = ⟨ξ, x*⟩ − Φ(x*)` with `∇Φ(x*) = ξ`.
pub fn conjugate(potential: &dyn ConvexPotential, xi: &DVector<f64>, tol: &Tolerances) -> Result<f64> {
    conjugate_with(potential, xi, InverseMode::Analytic, tol)
}

/// A potential with its conjugate.
#[derive(Clone)]
pub struct ConjugatePair {
    pub primal: Arc<dyn ConvexPotential>,
    pub dual: Arc<ConjugatePotential>,
    pub mode: InverseMode,
}

impl ConjugatePair {
    pub fn new(primal: Arc<dyn ConvexPotential>, mode: InverseMode, tol: &Tolerances) -> Self {
        let dual = Arc::new(ConjugatePotential {
            primal: primal.clone(),
            mode,
            tol: *tol,
            range: primal.gradient_range(),
        });
        ConjugatePair { primal, dual, mode }
    }

    pub fn grad_inverse(&self, xi: &DVector<f64>) -> Result<Point> {
        gradient_inverse(&*self.primal, xi, self.mode, &self.dual.tol)
    }
}

/// `Φ*` on the range of `∇Φ`. The gradient is `(∇Φ)⁻¹` and the Hessian is
/// taken by second differences of conjugate values.
pub struct ConjugatePotential {
    primal: Arc<dyn ConvexPotential>,
    mode: InverseMode,
    tol: Tolerances,
    range: Domain,
}

impl ConjugatePotential {
    fn fd_tol(&self) -> Tolerances {
        self.tol.with_fd_step(CONJUGATE_FD_STEP)
    }
}

impl ConvexPotential for ConjugatePotential {
    fn name(&self) -> String {
        format!("conjugate({})", self.primal.name())
    }

    fn domain(&self) -> &Domain {
        &self.range
    }

    fn value(&self, xi: &Point) -> Result<f64> {
        conjugate_with(&*self.primal, xi, self.mode, &self.tol)
    }

    fn gradient(&self, xi: &Point) -> Result<DVector<f64>> {
        gradient_inverse(&*self.primal, xi, self.mode, &self.tol)
    }

    fn hessian(&self, xi: &Point) -> Result<DMatrix<f64>> {
        self.range.ensure(xi, "conjugate argument")?;
        numerics::fd_hessian(|z| self.value(z), xi, &self.fd_tol())
    }

    fn gradient_range(&self) -> Domain {
        self.primal.domain().clone()
    }

    fn gradient_inverse(&self, x: &DVector<f64>) -> Option<Result<Point>> {
        Some(self.primal.gradient(x))
    }
}

/// `Φ**(x) = ⟨x, ξ⟩ − Φ*(ξ)` with `ξ` found by Newton on `∇Φ*(ξ) = x`, each
/// evaluation of `∇Φ*` itself an inversion of `∇Φ`.
pub fn biconjugate(pair: &ConjugatePair, x: &Point, tol: &Tolerances) -> Result<f64> {
    pair.primal.domain().ensure(x, "biconjugate argument")?;
    let start = pair.primal.gradient(&pair.primal.domain().center())?;
    let xi = newton_solve(
        |xi| {
            pair.dual.domain().ensure(xi, "range of the gradient")?;
            Ok(pair.grad_inverse(xi)? - x)
        },
        |xi| {
            let xs = pair.grad_inverse(xi)?;
            numerics::inverse(&pair.primal.hessian(&xs)?, 1e-14, "primal Hessian")
        },
        &start,
        tol,
    )?;
    Ok(x.dot(&xi) - pair.dual.value(&xi)?)
}

/// `U*(ξ) = U((∇Φ)⁻¹(ξ))` on the range of `∇Φ`.
pub struct DualMap {
    pair: ConjugatePair,
    map: Arc<dyn DiffeoMap>,
}

impl DualMap {
    pub fn pair(&self) -> &ConjugatePair {
        &self.pair
    }
}

impl DiffeoMap for DualMap {
    fn name(&self) -> String {
        format!("dual({}, {})", self.map.name(), self.pair.primal.name())
    }

    fn domain(&self) -> &Domain {
        self.pair.dual.domain()
    }

    fn forward(&self, xi: &Point) -> Result<DVector<f64>> {
        self.map.forward(&self.pair.grad_inverse(xi)?)
    }

    /// `J_U(x*) Φ″(x*)⁻¹`
    fn jacobian(&self, xi: &Point) -> Result<DMatrix<f64>> {
        let x = self.pair.grad_inverse(xi)?;
        let h = self.pair.primal.hessian(&x)?;
        let ht = h
            .lu()
            .solve(&self.map.jacobian(&x)?.transpose())
            .ok_or(GeoError::SingularMatrix { context: "primal Hessian".into(), pivot: 0.0 })?;
        Ok(ht.transpose())
    }

    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        let x = self.map.inverse(y)?;
        let xi = self.pair.primal.gradient(&x)?;
        self.domain().ensure(&xi, "dual map image")?;
        Ok(xi)
    }

    fn sources(&self) -> DerivativeSources {
        let inv = match (self.pair.mode, self.pair.primal.gradient_inverse(&self.pair.primal.domain().center())) {
            (InverseMode::Analytic, Some(_)) => Source::Analytic,
            _ => Source::Newton,
        };
        DerivativeSources {
            jacobian: inv,
            second: Source::FiniteDifference,
            inverse: Source::Analytic,
        }
    }
}

pub fn dual_map(pair: &ConjugatePair, map: Arc<dyn DiffeoMap>) -> Result<DualMap> {
    if pair.primal.dim() != map.dim() {
        return Err(GeoError::DimensionMismatch { expected: pair.primal.dim(), found: map.dim() });
    }
    Ok(DualMap { pair: pair.clone(), map })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualGeodesicReport {
    /// `max_t ‖∇Φ(x(t)) − ξ_cf(t)‖∞` against the dual closed form.
    pub path_deviation: f64,
    /// `max_t |ξ̇ᵗΦ*″ξ̇ − ẋᵗΦ″ẋ|`.
    pub speed_deviation: f64,
    pub samples: usize,
}

impl DualGeodesicReport {
    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            Check::new("dual_geodesic_path", self.path_deviation, tolerance),
            Check::new("dual_geodesic_speed", self.speed_deviation, tolerance),
        ]
    }
}

/// Pushes the primal geodesic through `∇Φ` and compares it with the closed
/// form geodesic of `U*`; also compares metric speeds, with `ẋ = J⁻¹C` and
/// `ξ̇ = Φ″ẋ`.
pub fn dual_geodesic_check(
    pair: &ConjugatePair,
    map: Arc<dyn DiffeoMap>,
    x1: &Point,
    x2: &Point,
    n_samples: usize,
) -> Result<DualGeodesicReport> {
    let primal = geodesic_closed_form(&*map, x1, x2, n_samples)?;
    let dual = dual_map(pair, map.clone())?;
    let xi1 = pair.primal.gradient(x1)?;
    let xi2 = pair.primal.gradient(x2)?;
    let dual_path = geodesic_closed_form(&dual, &xi1, &xi2, n_samples)?;

    let (mut path_dev, mut speed_dev) = (MaxDev::default(), MaxDev::default());
    for ((_, x), (_, xi_cf)) in primal.samples.iter().zip(&dual_path.samples) {
        let h = pair.primal.hessian(x)?;
        let xi = pair.primal.gradient(x)?;
        path_dev.add((&xi - xi_cf).amax());
        let xdot = map.inverse_jacobian(x)? * &primal.momenta;
        let xidot = &h * &xdot;
        let primal_speed = xdot.dot(&(&h * &xdot));
        let dual_speed = xidot.dot(&(pair.dual.hessian(&xi)? * &xidot));
        speed_dev.add((dual_speed - primal_speed).abs());
    }
    Ok(DualGeodesicReport {
        path_deviation: path_dev.get(),
        speed_deviation: speed_dev.get(),
        samples: n_samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DualDistanceReport {
    pub primal_distance: f64,
    pub dual_distance: f64,
    pub deviation: f64,
}

/// `d_{U*}(∇Φ(x1), ∇Φ(x2))` against `d_U(x1, x2)`.
pub fn dual_distance_check(
    pair: &ConjugatePair,
    map: Arc<dyn DiffeoMap>,
    x1: &Point,
    x2: &Point,
) -> Result<DualDistanceReport> {
    let primal_distance = geodesic_distance(&*map, x1, x2)?;
    let dual = dual_map(pair, map)?;
    let xi1 = pair.primal.gradient(x1)?;
    let xi2 = pair.primal.gradient(x2)?;
    let dual_distance = geodesic_distance(&dual, &xi1, &xi2)?;
    Ok(DualDistanceReport {
        primal_distance,
        dual_distance,
        deviation: (primal_distance - dual_distance).abs(),
    })
}

/// Worst deviations of the two gradient/Hessian identities over samples.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    /// `max ‖∇Φ*_fd(∇Φ(x)) − x‖∞`, gradient of `Φ*` by differences of values.
    pub inverse_identity: f64,
    /// `max ‖Φ*″(∇Φ(x)) Φ″(x) − I‖∞`.
    pub hessian_product: f64,
    /// `max |Φ*(∇Φ(x)) + Φ(x) − ⟨∇Φ(x), x⟩|`.
    pub fenchel_equality: f64,
    pub samples: usize,
}

impl DualityReport {
    pub fn checks(&self, tolerance: f64) -> Vec<Check> {
        vec![
            Check::new("conjugate_gradient_inverse", self.inverse_identity, tolerance),
            Check::new("conjugate_hessian_product", self.hessian_product, tolerance),
            Check::new("fenchel_equality", self.fenchel_equality, tolerance),
        ]
    }
}

pub fn duality_identities(pair: &ConjugatePair, points: &[Point], tol: &Tolerances) -> Result<DualityReport> {
    let (mut inv, mut prod, mut fen) = (MaxDev::default(), MaxDev::default(), MaxDev::default());
    let fd_tol = tol.with_fd_step(CONJUGATE_FD_STEP);
    let n = pair.primal.dim();
    for x in points {
        let xi = pair.primal.gradient(x)?;
        let grad = numerics::fd_gradient(|z| pair.dual.value(z), &xi, &fd_tol)?;
        inv.add((grad - x).amax());
        let hp = pair.dual.hessian(&xi)? * pair.primal.hessian(x)?;
        prod.add((hp - DMatrix::identity(n, n)).amax());
        fen.add((pair.dual.value(&xi)? + pair.primal.value(x)? - xi.dot(x)).abs());
    }
    Ok(DualityReport {
        inverse_identity: inv.get(),
        hessian_product: prod.get(),
        fenchel_equality: fen.get(),
        samples: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pullback_metric;
    use crate::maps::{
        map_from_separable, IdentityMap, Phi, QuadraticForm, QuadraticPotential, SeparablePotential, SeparableScale,
        DEFAULT_SEED,
    };
    use std::f64::consts::E;

    fn p(xs: &[f64]) -> Point {
        DVector::from_column_slice(xs)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// `sup_x ξx − Φ(x)` by grid scan then golden-section refinement.
    fn grid_sup(phi: impl Fn(f64) -> f64, xi: f64, lo: f64, hi: f64) -> f64 {
        let obj = |x: f64| xi * x - phi(x);
        let n = 4000;
        let step = (hi - lo) / n as f64;
        let best = (0..=n).max_by(|&a, &b| {
            obj(lo + a as f64 * step).total_cmp(&obj(lo + b as f64 * step))
        });
        let c = lo + best.unwrap() as f64 * step;
        let (mut a, mut b) = (c - step, c + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let (m1, m2) = (b - g * (b - a), a + g * (b - a));
            if obj(m1) < obj(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        obj(0.5 * (a + b))
    }

    fn exp_pair(dim: usize, mode: InverseMode) -> ConjugatePair {
        ConjugatePair::new(Arc::new(SeparablePotential::new(Phi::Exp, dim).unwrap()), mode, &tol())
    }

    #[test]
    fn quadratic_is_self_dual() {
        let q = QuadraticPotential::new(2).unwrap();
        let xi = p(&[0.3, -1.7]);
        assert!((conjugate(&q, &xi, &tol()).unwrap() - 0.5 * xi.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn exp_conjugate_matches_grid_oracle() {
        let exp = SeparablePotential::new(Phi::Exp, 1).unwrap();
        for xi in [0.2, 0.7, 1.0, 2.5, 5.0] {
            let oracle = grid_sup(f64::exp, xi, -10.0, 10.0);
            let newton = conjugate_with(&exp, &p(&[xi]), InverseMode::Newton, &tol()).unwrap();
            let analytic = conjugate(&exp, &p(&[xi]), &tol()).unwrap();
            assert!((newton - oracle).abs() < 1e-6);
            assert!((analytic - (xi * xi.ln() - xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_gradient_range() {
        let exp = SeparablePotential::new(Phi::Exp, 1).unwrap();
        for mode in [InverseMode::Analytic, InverseMode::Newton] {
            let err = conjugate_with(&exp, &p(&[-1.0]), mode, &tol()).unwrap_err();
            assert!(matches!(err, GeoError::DomainViolation { .. }));
        }
    }

    #[test]
    fn fenchel_and_hessian_identities() {
        for mode in [InverseMode::Analytic, InverseMode::Newton] {
            let pair = exp_pair(2, mode);
            let pts = pair.primal.domain().sample_points(10, DEFAULT_SEED);
            let rep = duality_identities(&pair, &pts, &tol()).unwrap();
            assert!(rep.inverse_identity < 1e-5, "{rep:?}");
            assert!(rep.hessian_product < 1e-5, "{rep:?}");
            assert!(rep.fenchel_equality < 1e-12, "{rep:?}");
        }
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let pair = ConjugatePair::new(Arc::new(QuadraticForm::new(a).unwrap()), InverseMode::Newton, &tol());
        let pts = pair.primal.domain().sample_points(5, DEFAULT_SEED);
        let rep = duality_identities(&pair, &pts, &tol()).unwrap();
        assert!(rep.hessian_product < 1e-5 && rep.inverse_identity < 1e-5);
    }

    #[test]
    fn biconjugation_recovers_values() {
        let pair = exp_pair(2, InverseMode::Newton);
        for x in pair.primal.domain().sample_points(5, DEFAULT_SEED) {
            let v = biconjugate(&pair, &x, &tol()).unwrap();
            assert!((v - pair.primal.value(&x).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn dual_map_examples() {
        let q = ConjugatePair::new(Arc::new(QuadraticPotential::new(2).unwrap()), InverseMode::Analytic, &tol());
        let d = dual_map(&q, Arc::new(IdentityMap::new(2).unwrap())).unwrap();
        let xi = p(&[0.4, -2.0]);
        assert_eq!(d.forward(&xi).unwrap(), xi);
        assert_eq!(d.jacobian(&xi).unwrap(), DMatrix::identity(2, 2));

        let pair = exp_pair(1, InverseMode::Analytic);
        let eh: Arc<dyn DiffeoMap> = Arc::new(map_from_separable(SeparableScale::exp_half(), 1).unwrap());
        let d = dual_map(&pair, eh).unwrap();
        for xi in [0.3, 1.0, 4.0] {
            let x = p(&[xi]);
            assert!((d.forward(&x).unwrap()[0] - 2.0 * xi.sqrt()).abs() < 1e-12);
            let g = pullback_metric(&d, &x).unwrap().g[(0, 0)];
            assert!((g - 1.0 / xi).abs() < 1e-12);
            assert!((g - pair.dual.hessian(&x).unwrap()[(0, 0)]).abs() < 1e-4);
        }
    }

    #[test]
    fn dual_geodesic_and_distance() {
        let pair = exp_pair(1, InverseMode::Analytic);
        let eh: Arc<dyn DiffeoMap> = Arc::new(map_from_separable(SeparableScale::exp_half(), 1).unwrap());
        let rep = dual_geodesic_check(&pair, eh.clone(), &p(&[0.0]), &p(&[1.0]), 3).unwrap();
        assert!(rep.path_deviation < 1e-5 && rep.speed_deviation < 1e-5, "{rep:?}");

        let rep = dual_distance_check(&pair, eh, &p(&[0.0]), &p(&[2.0])).unwrap();
        assert!((rep.primal_distance - (2.0 * E - 2.0).abs()).abs() < 1e-12);
        assert!(rep.deviation < 1e-12);

        let q = ConjugatePair::new(Arc::new(QuadraticPotential::new(2).unwrap()), InverseMode::Analytic, &tol());
        let id: Arc<dyn DiffeoMap> = Arc::new(IdentityMap::new(2).unwrap());
        let rep = dual_geodesic_check(&q, id.clone(), &p(&[0.0, 1.0]), &p(&[1.0, -1.0]), 5).unwrap();
        assert_eq!(rep.path_deviation, 0.0);
        assert_eq!(dual_distance_check(&q, id, &p(&[0.0, 1.0]), &p(&[1.0, -1.0])).unwrap().deviation, 0.0);
    }

    #[test]
    fn dual_distance_with_newton_inverses() {
        let pair = exp_pair(2, InverseMode::Newton);
        let eh: Arc<dyn DiffeoMap> = Arc::new(map_from_separable(SeparableScale::exp_half(), 2).unwrap());
        let pts = pair.primal.domain().sample_points(20, DEFAULT_SEED);
        for c in pts.chunks(2) {
            let rep = dual_distance_check(&pair, eh.clone(), &c[0], &c[1]).unwrap();
            assert!(rep.deviation < 1e-6);
        }
    }
}
