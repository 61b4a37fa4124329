use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Which factor `S` with `SᵗS = A` to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquareRootKind {
    /// Upper-triangular `Lᵗ` from the Cholesky factorization `A = LLᵗ`.
    CholeskyTranspose,
    /// The unique symmetric positive semidefinite root.
    #[default]
    SymmetricPsd,
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(GeoError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * (1.0 + a.amax()) {
        return Err(GeoError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Inverse via LU; pivots smaller than `floor` (relative to the largest
/// entry) are reported as singular.
pub fn inverse(m: &DMatrix<f64>, floor: f64, context: &str) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let u = lu.u();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let pivot = u.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if !(pivot > floor * scale) {
        return Err(GeoError::SingularMatrix {
            context: context.to_string(),
            pivot,
        });
    }
    lu.try_inverse().ok_or_else(|| GeoError::SingularMatrix {
        context: context.to_string(),
        pivot,
    })
}

/// Square root `S` of an SPD matrix with `SᵗS = A`.
///
/// Inputs whose smallest eigenvalue is below `eig_floor` are rejected with
/// that eigenvalue.
pub fn spd_sqrt(a: &DMatrix<f64>, kind: SquareRootKind, eig_floor: f64) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let min_ev = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_ev >= eig_floor) {
        return Err(GeoError::NotPositiveDefinite { eigenvalue: min_ev });
    }
    match kind {
        SquareRootKind::SymmetricPsd => {
            let v = &eig.eigenvectors;
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
            let s = v * d * v.transpose();
            Ok((&s + s.transpose()) * 0.5)
        }
        SquareRootKind::CholeskyTranspose => {
            let chol = sym
                .cholesky()
                .ok_or(GeoError::NotPositiveDefinite { eigenvalue: min_ev })?;
            Ok(chol.l().transpose())
        }
    }
}
