//! Pullback geometry of a diffeomorphism `U`.
//!
//! The metric is `g = JᵗJ`, distances are Euclidean distances between
//! images, and geodesics are images of straight lines. The integrators in
//! [`geodesic`] and [`hamilton`] solve the same problem without using that
//! shortcut and serve as cross-checks.

mod flow;
mod geodesic;
mod hamilton;

pub use flow::{flow, flow_semigroup_check, kernel_predictor_check, FlowReport};
pub use geodesic::{
    arclength, geodesic_closed_form, geodesic_euler_lagrange, speed_profile, verify_momentum_constancy,
    GeodesicPath, MomentumReport, ENDPOINT_FLAG, SPEED_STEP,
};
pub use hamilton::{
    check_canonical, check_canonical_with, hamiltonian, hamiltonian_flow, initial_momentum, transformed_momenta, BracketReport,
    HamiltonianTrajectory, PhaseState,
};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::maps::DiffeoMap;
use crate::numerics;
use crate::Point;

/// `g_ij(x) = Σ_k U^k_i U^k_j`.
#[derive(Debug, Clone)]
pub struct MetricTensor {
    pub at: Point,
    pub g: DMatrix<f64>,
    jacobian: DMatrix<f64>,
}

impl MetricTensor {
    /// `g⁻¹ = J⁻¹J⁻ᵗ`, better conditioned than inverting `g` directly.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let v = numerics::inverse(&self.jacobian, 1e-14, "map Jacobian")?;
        let gi = &v * v.transpose();
        Ok((&gi + gi.transpose()) * 0.5)
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// `vᵗ g v`.
    pub fn quadratic(&self, v: &nalgebra::DVector<f64>) -> f64 {
        (&self.jacobian * v).norm_squared()
    }
}

pub fn pullback_metric(map: &dyn DiffeoMap, x: &Point) -> Result<MetricTensor> {
    map.domain().ensure(x, "metric evaluation")?;
    let jacobian = map.jacobian(x)?;
    // reject singular Jacobians up front
    numerics::inverse(&jacobian, 1e-14, "map Jacobian")?;
    let g = jacobian.transpose() * &jacobian;
    let g = (&g + g.transpose()) * 0.5;
    Ok(MetricTensor { at: x.clone(), g, jacobian })
}

/// `d_U(x, y) = ‖U(y) − U(x)‖`.
pub fn geodesic_distance(map: &dyn DiffeoMap, x: &Point, y: &Point) -> Result<f64> {
    map.domain().ensure(x, "distance endpoint")?;
    map.domain().ensure(y, "distance endpoint")?;
    Ok((map.forward(y)? - map.forward(x)?).norm())
}
