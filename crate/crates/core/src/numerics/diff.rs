use nalgebra::{DMatrix, DVector};

use super::Tolerances;
use crate::error::Result;

/// Per-coordinate steps `fd_step * (1 + |x_i|)`.
pub fn fd_steps(x: &DVector<f64>, fd_step: f64) -> DVector<f64> {
    x.map(|xi| fd_step * (1.0 + xi.abs()))
}

/// Central-difference gradient of a scalar field.
///
/// Any error returned by `f` at a stencil point (typically a domain
/// violation) aborts the computation.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, tol: &Tolerances) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let h = fd_steps(x, tol.fd_step);
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h[i];
        let fp = f(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = f(&probe)?;
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h[i]);
    }
    Ok(grad)
}

/// Fourth-order five-point gradient, for callers whose errors accumulate
/// (integrators).
pub fn fd_gradient5<F>(f: F, x: &DVector<f64>, tol: &Tolerances) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let h = fd_steps(x, tol.fd_step);
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let mut at = |k: f64| {
            probe[i] = x[i] + k * h[i];
            let v = f(&probe);
            probe[i] = x[i];
            v
        };
        let (f2, f1, m1, m2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        grad[i] = (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h[i]);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector field; row `k` holds the
/// derivatives of component `k`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, tol: &Tolerances) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let h = fd_steps(x, tol.fd_step);
    let mut probe = x.clone();
    let mut columns = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h[i];
        let fp = f(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = f(&probe)?;
        probe[i] = x[i];
        columns.push((fp - fm) / (2.0 * h[i]));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |k, i| columns[i][k]))
}

/// Central-difference Hessian on the two-step stencil. Only the upper
/// triangle is differenced; the lower triangle is mirrored, so the output is
/// exactly symmetric.
pub fn fd_hessian<F>(f: F, x: &DVector<f64>, tol: &Tolerances) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let n = x.len();
    let h = fd_steps(x, tol.fd_step);
    let f0 = f(x)?;
    let mut hess = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for i in 0..n {
        probe[i] = x[i] + h[i];
        let fp = f(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = f(&probe)?;
        probe[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| {
                probe[i] = x[i] + si * h[i];
                probe[j] = x[j] + sj * h[j];
                let v = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}
