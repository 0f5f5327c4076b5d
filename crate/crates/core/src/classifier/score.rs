//! Mahalanobis distances for low-rank-plus-diagonal covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{precondition, Result};
use crate::linalg::{orthonormality_defect, spd_solve};
use crate::scalar::Real;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// `(x - mu)^T cov^{-1} (x - mu)` via a Cholesky solve.
pub fn mahalanobis_direct<T: Real>(
    x: &DVector<T>,
    mean: &DVector<T>,
    cov: &DMatrix<T>,
) -> Result<T> {
    let m = x.len();
    if mean.len() != m || cov.shape() != (m, m) {
        return Err(precondition("dimension mismatch"));
    }
    let diff = x - mean;
    let sol = spd_solve(cov, &DMatrix::from_column_slice(m, 1, diff.as_slice()))?;
    Ok(diff.dot(&sol.column(0)).max(T::zero()))
}

/// Mahalanobis distance for `cov = L diag(d) L^T + lambda I` with orthonormal
/// `L`, in `O(m r)`.
///
/// Equal to `||x - mu||^2 / lambda - ||u||^2 / lambda` with
/// `u = diag(sqrt(d / (d + lambda))) L^T (x - mu)`; evaluated as
/// `||(I - L L^T) z||^2 / lambda + sum_k (L_k^T z)^2 / (d_k + lambda)`,
/// which is the same quantity without the cancellation.
pub fn r_score<T: Real>(
    x: &DVector<T>,
    mean: &DVector<T>,
    l: &DMatrix<T>,
    d: &DVector<T>,
    lambda: T,
) -> Result<T> {
    check_factors(x.len(), mean.len(), l, d)?;
    if !lambda.is_positive_value() {
        return Err(precondition("lambda must be positive"));
    }
    if orthonormality_defect(l) > T::lit(ORTHONORMAL_TOL) {
        return Err(precondition("L must have orthonormal columns"));
    }
    Ok(r_score_unchecked(&(x - mean), l, d, lambda))
}

/// Mahalanobis distance for `cov = L D L^T + diag(psi)`: whitens by
/// `psi^{-1/2}` and applies [`r_score`] with `lambda = 1`.
///
/// `l` and `d` are the factors of the whitened low-rank part, i.e.
/// `psi^{-1/2} L D L^T psi^{-1/2} = l diag(d) l^T`.
pub fn general_r_score<T: Real>(
    x: &DVector<T>,
    mean: &DVector<T>,
    l: &DMatrix<T>,
    d: &DVector<T>,
    psi: &DVector<T>,
) -> Result<T> {
    check_factors(x.len(), mean.len(), l, d)?;
    if psi.len() != x.len() || psi.iter().any(|&p| !p.is_positive_value()) {
        return Err(precondition(
            "psi must be positive with one entry per feature",
        ));
    }
    if orthonormality_defect(l) > T::lit(ORTHONORMAL_TOL) {
        return Err(precondition("L' must have orthonormal columns"));
    }
    let inv_sqrt = psi.map(|p| T::one() / p.sqrt());
    let z = (x - mean).component_mul(&inv_sqrt);
    Ok(r_score_unchecked(&z, l, d, T::one()))
}

fn check_factors<T: Real>(m: usize, mean_len: usize, l: &DMatrix<T>, d: &DVector<T>) -> Result<()> {
    if mean_len != m || l.nrows() != m || l.ncols() != d.len() {
        return Err(precondition(format!(
            "dimension mismatch: x {m}, mean {mean_len}, L {}x{}, d {}",
            l.nrows(),
            l.ncols(),
            d.len()
        )));
    }
    if d.iter().any(|&v| v < T::zero()) {
        return Err(precondition("spectral weights must be non-negative"));
    }
    Ok(())
}

/// Core of the r-score on a centered (and, if needed, whitened) vector `z`.
pub(crate) fn r_score_unchecked<T: Real>(
    z: &DVector<T>,
    l: &DMatrix<T>,
    d: &DVector<T>,
    lambda: T,
) -> T {
    let proj = l.tr_mul(z);
    let orth = z - l * &proj;
    let mut acc = orth.norm_squared() / lambda;
    for k in 0..proj.len() {
        acc += proj[k] * proj[k] / (d[k] + lambda);
    }
    acc
}
