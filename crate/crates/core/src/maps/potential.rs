use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use super::catalog::{param_f64, param_str, Params};
use super::{ConvexPotential, Domain};
use crate::error::{GeoError, Result};
use crate::numerics;
use crate::Point;

fn ensure_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(GeoError::invalid("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// `Φ(x) = ½‖x‖²`
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    domain: Domain,
}

impl QuadraticPotential {
    pub fn new(dim: usize) -> Result<Self> {
        ensure_dim(dim)?;
        Ok(QuadraticPotential { domain: Domain::full(dim) })
    }
}

impl ConvexPotential for QuadraticPotential {
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.domain.ensure(x, "quadratic")?;
        Ok(0.5 * x.norm_squared())
    }
    fn gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "quadratic")?;
        Ok(x.clone())
    }
    fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "quadratic")?;
        Ok(DMatrix::identity(x.len(), x.len()))
    }
    fn eigen_floor(&self) -> Option<f64> {
        Some(1.0)
    }
    fn gradient_inverse(&self, xi: &DVector<f64>) -> Option<Result<Point>> {
        Some(Ok(xi.clone()))
    }
}

/// `Φ(x) = ½ xᵗAx` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    floor: f64,
    domain: Domain,
}

impl QuadraticForm {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        ensure_dim(a.nrows())?;
        let ev = numerics::symmetric_eigenvalues(&a)?;
        if !(ev[0] > 0.0) {
            return Err(GeoError::NotPositiveDefinite { eigenvalue: ev[0] });
        }
        let a = (&a + a.transpose()) * 0.5;
        let a_inv = numerics::inverse(&a, 1e-14, "quadratic form")?;
        Ok(QuadraticForm {
            domain: Domain::full(a.nrows()),
            a,
            a_inv,
            floor: ev[0],
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl ConvexPotential for QuadraticForm {
    fn name(&self) -> String {
        "quadratic_form".into()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.domain.ensure(x, "quadratic_form")?;
        Ok(0.5 * x.dot(&(&self.a * x)))
    }
    fn gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "quadratic_form")?;
        Ok(&self.a * x)
    }
    fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "quadratic_form")?;
        Ok(self.a.clone())
    }
    fn eigen_floor(&self) -> Option<f64> {
        Some(self.floor)
    }
    fn gradient_inverse(&self, xi: &DVector<f64>) -> Option<Result<Point>> {
        Some(Ok(&self.a_inv * xi))
    }
}

/// One-dimensional convex profile `φ` of a separable potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `e^x` on ℝ
    Exp,
    /// `x log x − x` on `x > 0`
    XLogX,
    /// `−log x` on `x > 0`
    NegLog,
    /// `x^p` on `x > 0`, `p > 1`
    Power(f64),
}

impl Phi {
    fn natural_interval(self) -> (f64, f64) {
        match self {
            Phi::Exp => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn name(self) -> String {
        match self {
            Phi::Exp => "exp".into(),
            Phi::XLogX => "xlogx".into(),
            Phi::NegLog => "neglog".into(),
            Phi::Power(p) => format!("power({p})"),
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Phi::Exp => x.exp(),
            Phi::XLogX => x * x.ln() - x,
            Phi::NegLog => -x.ln(),
            Phi::Power(p) => x.powf(p),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Phi::Exp => x.exp(),
            Phi::XLogX => x.ln(),
            Phi::NegLog => -1.0 / x,
            Phi::Power(p) => p * x.powf(p - 1.0),
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Phi::Exp => x.exp(),
            Phi::XLogX => 1.0 / x,
            Phi::NegLog => 1.0 / (x * x),
            Phi::Power(p) => p * (p - 1.0) * x.powf(p - 2.0),
        }
    }

    /// Inverse of `φ′`, which is strictly increasing.
    pub fn d1_inverse(self, xi: f64) -> f64 {
        match self {
            Phi::Exp => xi.ln(),
            Phi::XLogX => xi.exp(),
            Phi::NegLog => -1.0 / xi,
            Phi::Power(p) => (xi / p).powf(1.0 / (p - 1.0)),
        }
    }

    /// `φ′` at an interval endpoint, taking natural limits.
    fn d1_limit(self, x: f64) -> f64 {
        match (self, x) {
            (Phi::Exp, x) if x == f64::NEG_INFINITY => 0.0,
            (Phi::XLogX, x) if x == 0.0 => f64::NEG_INFINITY,
            (Phi::NegLog, x) if x == 0.0 => f64::NEG_INFINITY,
            (Phi::Power(_), x) if x == 0.0 => 0.0,
            (_, x) if x == f64::INFINITY => match self {
                Phi::NegLog => 0.0,
                _ => f64::INFINITY,
            },
            _ => self.d1(x),
        }
    }
}

/// `Φ(x) = Σ φ(x_i)` on a product of intervals.
#[derive(Debug, Clone)]
pub struct SeparablePotential {
    phi: Phi,
    lo: f64,
    hi: f64,
    domain: Domain,
}

impl SeparablePotential {
    pub fn new(phi: Phi, dim: usize) -> Result<Self> {
        let (lo, hi) = phi.natural_interval();
        Self::on_interval(phi, dim, lo, hi)
    }

    /// Restricts `φ` to `(lo, hi)ⁿ`, which must sit inside its natural
    /// interval.
    pub fn on_interval(phi: Phi, dim: usize, lo: f64, hi: f64) -> Result<Self> {
        ensure_dim(dim)?;
        if let Phi::Power(p) = phi {
            if !(p > 1.0 && p.is_finite()) {
                return Err(GeoError::invalid("p", "power potential requires p > 1"));
            }
        }
        let (nlo, nhi) = phi.natural_interval();
        if lo < nlo || hi > nhi {
            return Err(GeoError::invalid(
                "domain",
                format!("{} requires an interval inside ({nlo}, {nhi})", phi.name()),
            ));
        }
        let domain = Domain::open_box(vec![lo; dim], vec![hi; dim])?;
        Ok(SeparablePotential { phi, lo, hi, domain })
    }

    pub fn phi(&self) -> Phi {
        self.phi
    }
}

impl ConvexPotential for SeparablePotential {
    fn name(&self) -> String {
        format!("separable({})", self.phi.name())
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &Point) -> Result<f64> {
        self.domain.ensure(x, "separable potential")?;
        Ok(x.iter().map(|&v| self.phi.value(v)).sum())
    }
    fn gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.domain.ensure(x, "separable potential")?;
        Ok(x.map(|v| self.phi.d1(v)))
    }
    fn hessian(&self, x: &Point) -> Result<DMatrix<f64>> {
        self.domain.ensure(x, "separable potential")?;
        Ok(DMatrix::from_diagonal(&x.map(|v| self.phi.d2(v))))
    }
    fn eigen_floor(&self) -> Option<f64> {
        // φ″ is monotone on each catalog interval, so its infimum sits at an
        // endpoint
        let at = |x: f64| -> f64 {
            if x.is_finite() && x != 0.0 {
                self.phi.d2(x)
            } else {
                0.0
            }
        };
        let a = match self.phi {
            Phi::Exp => at(self.lo),
            Phi::XLogX | Phi::NegLog => at(self.hi),
            Phi::Power(p) if p >= 2.0 => at(self.lo),
            Phi::Power(_) => at(self.hi),
        };
        (a > 0.0).then_some(a)
    }
    fn gradient_range(&self) -> Domain {
        let lo = self.phi.d1_limit(self.lo);
        let hi = self.phi.d1_limit(self.hi);
        Domain::open_box(vec![lo; self.dim()], vec![hi; self.dim()]).unwrap_or_else(|_| Domain::full(self.dim()))
    }
    fn gradient_inverse(&self, xi: &DVector<f64>) -> Option<Result<Point>> {
        let range = self.gradient_range();
        if let Err(e) = range.ensure(xi, "gradient range") {
            return Some(Err(e));
        }
        Some(Ok(xi.map(|v| self.phi.d1_inverse(v))))
    }
}

/// Catalog lookup for convex potentials.
///
/// * `quadratic`: `½‖x‖²`
/// * `separable`: `phi` ∈ {`exp`, `xlogx`, `neglog`, `power`} (with `p`),
///   optional `lo` / `hi` restricting each coordinate
/// * `quadratic_form`: `matrix`: SPD rows
pub fn builtin_potential(name: &str, dim: usize, params: &Params) -> Result<Arc<dyn ConvexPotential>> {
    match name {
        "quadratic" => Ok(Arc::new(QuadraticPotential::new(dim)?)),
        "separable" => {
            let phi = match param_str(params, "phi")?.as_str() {
                "exp" => Phi::Exp,
                "xlogx" | "x_log_x" => Phi::XLogX,
                "neglog" | "neg_log" => Phi::NegLog,
                "power" => Phi::Power(param_f64(params, "p")?.ok_or_else(|| GeoError::invalid("p", "missing"))?),
                other => return Err(GeoError::UnknownCatalogEntry(format!("separable phi `{other}`"))),
            };
            let (nlo, nhi) = phi.natural_interval();
            let lo = param_f64(params, "lo")?.unwrap_or(nlo);
            let hi = param_f64(params, "hi")?.unwrap_or(nhi);
            Ok(Arc::new(SeparablePotential::on_interval(phi, dim, lo, hi)?))
        }
        "quadratic_form" => {
            let rows = match params.get("matrix") {
                Some(Value::Array(rows)) => rows,
                _ => return Err(GeoError::invalid("matrix", "expected an array of rows")),
            };
            let mut data = Vec::new();
            for row in rows {
                let row = row
                    .as_array()
                    .ok_or_else(|| GeoError::invalid("matrix", "rows must be arrays"))?;
                if row.len() != rows.len() {
                    return Err(GeoError::invalid("matrix", "must be square"));
                }
                for v in row {
                    data.push(v.as_f64().ok_or_else(|| GeoError::invalid("matrix", "entries must be numbers"))?);
                }
            }
            if rows.len() != dim {
                return Err(GeoError::DimensionMismatch { expected: dim, found: rows.len() });
            }
            Ok(Arc::new(QuadraticForm::new(DMatrix::from_row_slice(dim, dim, &data))?))
        }
        other => Err(GeoError::UnknownCatalogEntry(other.to_string())),
    }
}

/// Every catalog potential in dimension `dim`, for sweeping invariant checks.
pub fn catalog_potentials(dim: usize) -> Vec<Arc<dyn ConvexPotential>> {
    let mut a = DMatrix::from_element(dim, dim, 0.3);
    for i in 0..dim {
        a[(i, i)] = 1.0 + i as f64;
    }
    vec![
        Arc::new(QuadraticPotential::new(dim).unwrap()),
        Arc::new(QuadraticForm::new(a).unwrap()),
        Arc::new(SeparablePotential::new(Phi::Exp, dim).unwrap()),
        Arc::new(SeparablePotential::new(Phi::XLogX, dim).unwrap()),
        Arc::new(SeparablePotential::new(Phi::NegLog, dim).unwrap()),
        Arc::new(SeparablePotential::new(Phi::Power(3.0), dim).unwrap()),
        Arc::new(SeparablePotential::new(Phi::Power(1.5), dim).unwrap()),
    ]
}
