//! Diffeomorphisms `U` and convex potentials `Φ`.
//!
//! Both are trait objects so that catalog entries, user-composed maps and
//! maps produced by other modules (a potential's square-root map, a dual
//! map) share one interface. Catalog entries carry analytic derivatives;
//! everything else falls back to finite differences and reports so through
//! [`DerivativeSources`].

mod catalog;
mod domain;
mod potential;
mod scale;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use catalog::{
    builtin_map, catalog_maps, map_from_separable, GradientMap, IdentityMap, Params, SeparableMap, ShearMap,
    SphereInversion,
};
pub use domain::{Domain, DomainKind, DEFAULT_SEED};
pub use potential::{builtin_potential, catalog_potentials, Phi, QuadraticForm, QuadraticPotential, SeparablePotential};
pub use scale::{Monotonicity, ScaleKind, SeparableScale};

use crate::error::{GeoError, Result};
use crate::numerics::{self, Tolerances};
use crate::Point;

/// `second[k][(i, j)] = ∂²U^k / ∂x_i ∂x_j`.
pub type SecondDerivatives = Vec<DMatrix<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Analytic,
    FiniteDifference,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivativeSources {
    pub jacobian: Source,
    pub second: Source,
    pub inverse: Source,
}

impl DerivativeSources {
    pub const ANALYTIC: DerivativeSources = DerivativeSources {
        jacobian: Source::Analytic,
        second: Source::Analytic,
        inverse: Source::Analytic,
    };
}

/// A C² diffeomorphism from its domain onto its image.
///
/// `jacobian(x)[(k, i)] = ∂U^k/∂x_i`.
pub trait DiffeoMap: Send + Sync {
    fn name(&self) -> String;
    fn domain(&self) -> &Domain;
    fn forward(&self, x: &Point) -> Result<DVector<f64>>;
    fn jacobian(&self, x: &Point) -> Result<DMatrix<f64>>;
    fn inverse(&self, y: &DVector<f64>) -> Result<Point>;

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn sources(&self) -> DerivativeSources {
        DerivativeSources {
            jacobian: Source::Analytic,
            second: Source::FiniteDifference,
            inverse: Source::Analytic,
        }
    }

    fn second_derivs(&self, x: &Point) -> Result<SecondDerivatives> {
        fd_second_derivs(|p| self.jacobian(p), x, &Tolerances::default())
    }

    /// Inverse Jacobian `V = J⁻¹`.
    fn inverse_jacobian(&self, x: &Point) -> Result<DMatrix<f64>> {
        numerics::inverse(&self.jacobian(x)?, 1e-14, "map Jacobian")
    }
}

/// A strictly convex C² function on a convex domain.
pub trait ConvexPotential: Send + Sync {
    fn name(&self) -> String;
    fn domain(&self) -> &Domain;
    fn value(&self, x: &Point) -> Result<f64>;
    fn gradient(&self, x: &Point) -> Result<DVector<f64>>;
    fn hessian(&self, x: &Point) -> Result<DMatrix<f64>>;

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    /// Uniform lower bound `a` on the smallest Hessian eigenvalue, when
    /// declared.
    fn eigen_floor(&self) -> Option<f64> {
        None
    }

    /// Range of `∇Φ`. Defaults to the whole space when unknown.
    fn gradient_range(&self) -> Domain {
        Domain::full(self.dim())
    }

    /// Closed-form `(∇Φ)⁻¹`, if the potential knows one.
    fn gradient_inverse(&self, _xi: &DVector<f64>) -> Option<Result<Point>> {
        None
    }
}

/// Second derivatives by central differences of a Jacobian, symmetrized in
/// the last two indices.
pub fn fd_second_derivs<J>(jac: J, x: &Point, tol: &Tolerances) -> Result<SecondDerivatives>
where
    J: Fn(&Point) -> Result<DMatrix<f64>>,
{
    let n = x.len();
    let h = numerics::fd_steps(x, tol.fd_step);
    let mut probe = x.clone();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x[j] + h[j];
        let jp = jac(&probe)?;
        probe[j] = x[j] - h[j];
        let jm = jac(&probe)?;
        probe[j] = x[j];
        columns.push((jp - jm) / (2.0 * h[j]));
    }
    let m = columns.first().map_or(0, |c| c.nrows());
    Ok((0..m)
        .map(|k| {
            let raw = DMatrix::from_fn(n, n, |i, j| columns[j][(k, i)]);
            (&raw + raw.transpose()) * 0.5
        })
        .collect())
}

/// Newton inversion of `U(x) = y` starting from `start`, followed by a
/// domain check.
pub fn newton_inverse<M: DiffeoMap + ?Sized>(
    map: &M,
    y: &DVector<f64>,
    start: &Point,
    tol: &Tolerances,
) -> Result<Point> {
    if y.len() != map.dim() {
        return Err(GeoError::DimensionMismatch { expected: map.dim(), found: y.len() });
    }
    let x = numerics::newton_solve(|x| Ok(map.forward(x)? - y), |x| map.jacobian(x), start, tol)?;
    map.domain().ensure(&x, "inverse image")?;
    Ok(x)
}

/// Max deviation between analytic and finite-difference Jacobians over the
/// given points.
pub fn jacobian_fd_deviation(map: &dyn DiffeoMap, points: &[Point], tol: &Tolerances) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let fd = numerics::fd_jacobian(|p| map.forward(p), x, tol)?;
        worst = worst.max((map.jacobian(x)? - fd).amax());
    }
    Ok(worst)
}

/// Max deviation between analytic and finite-difference Hessians over the
/// given points.
pub fn hessian_fd_deviation(pot: &dyn ConvexPotential, points: &[Point], tol: &Tolerances) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let fd = numerics::fd_hessian(|p| pot.value(p), x, tol)?;
        worst = worst.max((pot.hessian(x)? - fd).amax());
    }
    Ok(worst)
}
