use nalgebra::{DMatrix, DVector};

use super::Tolerances;
use crate::error::{GeoError, Result};

const MAX_HALVINGS: usize = 30;

/// Damped Newton iteration for `F(x) = 0`.
///
/// A full step that increases `‖F‖` (or makes `F` fail, e.g. by leaving the
/// domain) is halved up to 30 times. Converges when `‖F(x)‖ ≤ newton_tol`.
pub fn newton_solve<F, J>(f: F, jac: J, x0: &DVector<f64>, tol: &Tolerances) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = x0.clone();
    let mut fx = f(&x)?;
    let mut res = fx.norm();
    for _ in 0..tol.newton_max_iter {
        if res <= tol.newton_tol {
            return Ok(x);
        }
        let jx = jac(&x)?;
        let lu = jx.clone().lu();
        let scale = jx.amax().max(f64::MIN_POSITIVE);
        let pivot = lu.u().diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if !(pivot > tol.spd_eig_floor * scale) {
            return Err(GeoError::SingularMatrix {
                context: "Newton Jacobian".into(),
                pivot,
            });
        }
        let step = lu.solve(&(-&fx)).ok_or_else(|| GeoError::SingularMatrix {
            context: "Newton Jacobian".into(),
            pivot,
        })?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x + &step * lambda;
            if let Ok(ft) = f(&trial) {
                let r = ft.norm();
                if r.is_finite() && r < res {
                    accepted = Some((trial, ft, r));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, ft, r)) => {
                x = xt;
                fx = ft;
                res = r;
            }
            // no decrease possible at machine precision
            None if res <= tol.newton_tol * 1e3 => return Ok(x),
            None => {
                return Err(GeoError::NewtonFailed {
                    iterations: tol.newton_max_iter,
                    residual: res,
                })
            }
        }
    }
    if res <= tol.newton_tol {
        Ok(x)
    } else {
        Err(GeoError::NewtonFailed {
            iterations: tol.newton_max_iter,
            residual: res,
        })
    }
}
