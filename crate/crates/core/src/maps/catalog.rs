use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use super::potential::{builtin_potential, Phi, SeparablePotential};
use super::{
    fd_second_derivs, newton_inverse, ConvexPotential, DerivativeSources, DiffeoMap, Domain, SecondDerivatives,
    SeparableScale, Source,
};
use crate::error::{GeoError, Result};
use crate::numerics::Tolerances;
use crate::Point;

/// Catalog parameters, as they appear in a JSON config.
pub type Params = BTreeMap<String, Value>;

pub(crate) fn param_f64(params: &Params, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| GeoError::invalid(key, "expected a number")),
    }
}

pub(crate) fn param_str(params: &Params, key: &str) -> Result<String> {
    match params.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(GeoError::invalid(key, "expected a string")),
        None => Err(GeoError::invalid(key, "missing")),
    }
}

fn ensure_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(GeoError::invalid("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IdentityMap {
    domain: Domain,
}

impl IdentityMap {
    pub fn new(dim: usize) -> Result<Self> {
        ensure_dim(dim)?;
        Ok(IdentityMap { domain: Domain::full(dim) })
    }
}

impl DiffeoMap for IdentityMap {
    fn name(&self) -> String {
        "identity".into()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "identity")?;
        Ok(x.clone())
    }
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "identity")?;
        Ok(DMatrix::identity(x.len(), x.len()))
    }
    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        self.domain.ensure(y, "identity")?;
        Ok(y.clone())
    }
    fn sources(&self) -> DerivativeSources {
        DerivativeSources::ANALYTIC
    }
    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        self.domain.ensure(x, "identity")?;
        Ok(vec![DMatrix::zeros(x.len(), x.len()); x.len()])
    }
}

/// `U^k(x) = u(x_k)`.
#[derive(Debug, Clone)]
pub struct SeparableMap {
    scale: SeparableScale,
    domain: Domain,
}

pub fn map_from_separable(scale: SeparableScale, dim: usize) -> Result<SeparableMap> {
    ensure_dim(dim)?;
    let domain = scale.domain(dim);
    Ok(SeparableMap { scale, domain })
}

impl SeparableMap {
    pub fn scale(&self) -> &SeparableScale {
        &self.scale
    }
}

impl DiffeoMap for SeparableMap {
    fn name(&self) -> String {
        format!("separable({})", self.scale.name())
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "separable map")?;
        Ok(x.map(|v| self.scale.u(v)))
    }
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "separable map")?;
        Ok(DMatrix::from_diagonal(&x.map(|v| self.scale.u_prime(v))))
    }
    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        if y.len() != self.dim() {
            return Err(GeoError::DimensionMismatch { expected: self.dim(), found: y.len() });
        }
        let mut x = DVector::zeros(y.len());
        for (xi, &yi) in x.iter_mut().zip(y.iter()) {
            *xi = self.scale.u_inverse(yi)?;
        }
        Ok(x)
    }
    fn sources(&self) -> DerivativeSources {
        if self.scale.is_analytic() {
            DerivativeSources::ANALYTIC
        } else {
            DerivativeSources {
                jacobian: Source::Analytic,
                second: Source::Analytic,
                inverse: Source::Newton,
            }
        }
    }
    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        self.domain.ensure(x, "separable map")?;
        let n = x.len();
        Ok((0..n)
            .map(|k| {
                let mut h = DMatrix::zeros(n, n);
                h[(k, k)] = self.scale.u_second(x[k]);
                h
            })
            .collect())
    }
}

/// Inversion in the unit sphere, `U(x) = x / ‖x‖²`, on `ℝⁿ ∖ {0}`.
#[derive(Debug, Clone)]
pub struct SphereInversion {
    domain: Domain,
}

impl SphereInversion {
    pub fn new(dim: usize) -> Result<Self> {
        ensure_dim(dim)?;
        Ok(SphereInversion { domain: Domain::punctured(dim) })
    }
}

impl DiffeoMap for SphereInversion {
    fn name(&self) -> String {
        "sphere_inversion".into()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "sphere inversion")?;
        Ok(x / x.norm_squared())
    }
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "sphere inversion")?;
        let r2 = x.norm_squared();
        let n = x.len();
        Ok((DMatrix::identity(n, n) - x * x.transpose() * (2.0 / r2)) / r2)
    }
    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        // involution
        self.forward(y)
    }
    fn sources(&self) -> DerivativeSources {
        DerivativeSources::ANALYTIC
    }
    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        self.domain.ensure(x, "sphere inversion")?;
        let n = x.len();
        let r2 = x.norm_squared();
        let (r4, r6) = (r2 * r2, r2 * r2 * r2);
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Ok((0..n)
            .map(|k| {
                DMatrix::from_fn(n, n, |i, j| {
                    -2.0 * (delta(k, i) * x[j] + delta(k, j) * x[i] + delta(i, j) * x[k]) / r4
                        + 8.0 * x[i] * x[j] * x[k] / r6
                })
            })
            .collect())
    }
}

/// `U(x) = x + c·x₁²·e₂`: a global diffeomorphism of ℝⁿ (n ≥ 2) whose
/// pullback metric is not a Hessian, so it violates the map integrability
/// condition for any `c ≠ 0`.
#[derive(Debug, Clone)]
pub struct ShearMap {
    coeff: f64,
    domain: Domain,
}

impl ShearMap {
    pub fn new(dim: usize, coeff: f64) -> Result<Self> {
        if dim < 2 {
            return Err(GeoError::invalid("dim", "shear requires dim ≥ 2"));
        }
        if !coeff.is_finite() {
            return Err(GeoError::invalid("coeff", "must be finite"));
        }
        Ok(ShearMap { coeff, domain: Domain::full(dim) })
    }
}

impl DiffeoMap for ShearMap {
    fn name(&self) -> String {
        format!("shear({})", self.coeff)
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "shear")?;
        let mut y = x.clone();
        y[1] += self.coeff * x[0] * x[0];
        Ok(y)
    }
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "shear")?;
        let n = x.len();
        let mut j = DMatrix::identity(n, n);
        j[(1, 0)] = 2.0 * self.coeff * x[0];
        Ok(j)
    }
    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        self.domain.ensure(y, "shear")?;
        let mut x = y.clone();
        x[1] -= self.coeff * y[0] * y[0];
        Ok(x)
    }
    fn sources(&self) -> DerivativeSources {
        DerivativeSources::ANALYTIC
    }
    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        self.domain.ensure(x, "shear")?;
        let n = x.len();
        let mut out = vec![DMatrix::zeros(n, n); n];
        out[1][(0, 0)] = 2.0 * self.coeff;
        Ok(out)
    }
}

/// `U = ∇Ψ` for a strictly convex `Ψ`; the Jacobian is `Ψ″`.
#[derive(Clone)]
pub struct GradientMap {
    potential: Arc<dyn ConvexPotential>,
    tol: Tolerances,
}

impl GradientMap {
    pub fn new(potential: Arc<dyn ConvexPotential>) -> Self {
        GradientMap {
            potential,
            tol: Tolerances::default(),
        }
    }

    pub fn potential(&self) -> &Arc<dyn ConvexPotential> {
        &self.potential
    }
}

impl DiffeoMap for GradientMap {
    fn name(&self) -> String {
        format!("gradient_of({})", self.potential.name())
    }
    fn domain(&self) -> &Domain {
        self.potential.domain()
    }
    fn forward(&self, x: &Point) -> Result<DVector<f64>> {
        self.potential.gradient(x)
    }
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.potential.hessian(x)
    }
    fn inverse(&self, y: &DVector<f64>) -> Result<Point> {
        match self.potential.gradient_inverse(y) {
            Some(r) => r,
            None => newton_inverse(self, y, &self.domain().center(), &self.tol),
        }
    }
    fn sources(&self) -> DerivativeSources {
        DerivativeSources {
            jacobian: Source::Analytic,
            second: Source::FiniteDifference,
            inverse: if self.potential.gradient_inverse(&self.domain().center().map(|_| 1.0)).is_some() {
                Source::Analytic
            } else {
                Source::Newton
            },
        }
    }
    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        fd_second_derivs(|p| self.potential.hessian(p), x, &self.tol)
    }
}

/// Catalog lookup for diffeomorphisms.
///
/// * `identity`
/// * `separable`: `scale` ∈ {`linear`, `log`, `exp_half`, `power` (with
///   `p`), `reciprocal`}
/// * `sphere_inversion`
/// * `gradient_of`: `potential`: `{"name": ..., "params": {...}}`
/// * `shear`: `coeff` (default 1); dim ≥ 2
pub fn builtin_map(name: &str, dim: usize, params: &Params) -> Result<Arc<dyn DiffeoMap>> {
    match name {
        "identity" => Ok(Arc::new(IdentityMap::new(dim)?)),
        "separable" => {
            let scale = match param_str(params, "scale")?.as_str() {
                "linear" => SeparableScale::linear(),
                "log" => SeparableScale::log(),
                "exp_half" => SeparableScale::exp_half(),
                "reciprocal" => SeparableScale::reciprocal(),
                "power" => SeparableScale::power(param_f64(params, "p")?.ok_or_else(|| GeoError::invalid("p", "missing"))?)?,
                other => return Err(GeoError::UnknownCatalogEntry(format!("separable scale `{other}`"))),
            };
            Ok(Arc::new(map_from_separable(scale, dim)?))
        }
        "sphere_inversion" => Ok(Arc::new(SphereInversion::new(dim)?)),
        "shear" => Ok(Arc::new(ShearMap::new(dim, param_f64(params, "coeff")?.unwrap_or(1.0))?)),
        "gradient_of" => {
            let spec = params
                .get("potential")
                .and_then(Value::as_object)
                .ok_or_else(|| GeoError::invalid("potential", "expected {\"name\": ..., \"params\": {...}}"))?;
            let pname = spec
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| GeoError::invalid("potential.name", "missing"))?;
            let pparams: Params = match spec.get("params") {
                Some(Value::Object(m)) => m.clone().into_iter().collect(),
                None => Params::new(),
                Some(_) => return Err(GeoError::invalid("potential.params", "expected an object")),
            };
            let pot = builtin_potential(pname, dim, &pparams)?;
            Ok(Arc::new(GradientMap::new(pot)))
        }
        other => Err(GeoError::UnknownCatalogEntry(other.to_string())),
    }
}

/// Every catalog map in dimension `dim` (the shear only for dim ≥ 2).
pub fn catalog_maps(dim: usize) -> Vec<Arc<dyn DiffeoMap>> {
    let sep = |s: SeparableScale| -> Arc<dyn DiffeoMap> { Arc::new(map_from_separable(s, dim).unwrap()) };
    let mut maps: Vec<Arc<dyn DiffeoMap>> = vec![
        Arc::new(IdentityMap::new(dim).unwrap()),
        sep(SeparableScale::linear()),
        sep(SeparableScale::log()),
        sep(SeparableScale::exp_half()),
        sep(SeparableScale::power(2.0).unwrap()),
        sep(SeparableScale::power(0.5).unwrap()),
        sep(SeparableScale::reciprocal()),
        Arc::new(SphereInversion::new(dim).unwrap()),
        Arc::new(GradientMap::new(Arc::new(SeparablePotential::new(Phi::Exp, dim).unwrap()))),
    ];
    if dim >= 2 {
        maps.push(Arc::new(ShearMap::new(dim, 0.5).unwrap()));
    }
    maps
}
