//! Shared numerical kernels: finite differences, Gauss-Legendre line
//! integrals, fixed-step RK4, damped Newton and SPD square roots.
//!
//! Everything here is a pure function of its inputs. Callbacks return
//! [`Result`](crate::Result) so that a domain violation raised deep inside a
//! map evaluation propagates out of the kernel unchanged.

mod diff;
mod linalg;
mod newton;
mod ode;
mod quadrature;

pub use diff::{fd_gradient, fd_gradient5, fd_hessian, fd_jacobian, fd_steps};
pub use linalg::{inverse, max_abs, operator_norm, spd_sqrt, symmetric_eigenvalues, SquareRootKind};
pub use newton::newton_solve;
pub use ode::{rk4_integrate, Trajectory};
pub use quadrature::{path_line_integral, GaussLegendre, Path, Segment};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Numerical knobs shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative finite-difference step; the actual step along coordinate
    /// `i` is `fd_step * (1 + |x_i|)`.
    pub fd_step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub ode_steps: usize,
    pub quad_points: usize,
    pub spd_eig_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fd_step: 1e-5,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            ode_steps: 1000,
            quad_points: 32,
            spd_eig_floor: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("fd_step", self.fd_step),
            ("newton_tol", self.newton_tol),
            ("spd_eig_floor", self.spd_eig_floor),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeoError::invalid(name, "must be finite and strictly positive"));
            }
        }
        let ints = [
            ("newton_max_iter", self.newton_max_iter),
            ("ode_steps", self.ode_steps),
            ("quad_points", self.quad_points),
        ];
        for (name, v) in ints {
            if v < 1 {
                return Err(GeoError::invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        self.fd_step = fd_step;
        self
    }

    pub fn with_ode_steps(mut self, steps: usize) -> Self {
        self.ode_steps = steps;
        self
    }

    pub fn with_quad_points(mut self, points: usize) -> Self {
        self.quad_points = points;
        self
    }
}
