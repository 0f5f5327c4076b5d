//! Dense helpers on top of nalgebra: sorted spectral decompositions and the
//! score/loading orthonormalization shared by ELF and HeteroPCA.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{numeric, Result};
use crate::scalar::Real;

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
pub fn sym_eigen_desc<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    permute(&eig.eigenvalues, &eig.eigenvectors, &order)
}

/// Top-`r` eigenpairs of a symmetric matrix ranked by absolute eigenvalue.
/// For symmetric input these are the leading singular triplets.
pub fn sym_top_abs<T: Real>(m: &DMatrix<T>, r: usize) -> (DVector<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .partial_cmp(&eig.eigenvalues[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(r);
    permute(&eig.eigenvalues, &eig.eigenvectors, &order)
}

fn permute<T: Real>(
    vals: &DVector<T>,
    vecs: &DMatrix<T>,
    order: &[usize],
) -> (DVector<T>, DMatrix<T>) {
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| vals[i]));
    let vectors = vecs.select_columns(order.iter());
    (values, vectors)
}

/// Thin SVD `a = u * diag(s) * v^T` with singular values in descending order.
pub struct ThinSvd<T: Real> {
    pub u: DMatrix<T>,
    pub s: DVector<T>,
    pub v: DMatrix<T>,
}

pub fn thin_svd<T: Real>(a: &DMatrix<T>) -> Result<ThinSvd<T>> {
    let svd = SVD::try_new(a.clone(), true, true, T::default_epsilon(), 0)
        .ok_or_else(|| numeric("SVD did not converge"))?;
    let u = svd.u.ok_or_else(|| numeric("SVD missing U"))?;
    let v = svd.v_t.ok_or_else(|| numeric("SVD missing V"))?.transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(ThinSvd {
        u: u.select_columns(order.iter()),
        s: DVector::from_iterator(order.len(), order.iter().map(|&i| s[i])),
        v: v.select_columns(order.iter()),
    })
}

/// Rewrites a factorization `scores * loadings^T` so that the scores have
/// orthonormal columns: with `scores = U D V^T`, returns `(U, loadings V D)`.
/// The product is unchanged.
pub fn orthonormalize_factors<T: Real>(
    scores: &DMatrix<T>,
    loadings: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let svd = thin_svd(scores)?;
    let mut vd = svd.v;
    for (k, mut col) in vd.column_iter_mut().enumerate() {
        col *= svd.s[k];
    }
    Ok((svd.u, loadings * vd))
}

/// Cosines of the principal angles between the column spans of `a` and `b`
/// (both with orthonormal columns), descending.
pub fn principal_angle_cosines<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
    Ok(thin_svd(&(a.transpose() * b))?.s)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| numeric("matrix is not symmetric positive definite"))?;
    Ok(chol.solve(b))
}

pub fn spd_inverse<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| numeric("matrix is not symmetric positive definite"))?;
    Ok(chol.inverse())
}

pub fn spd_log_det<T: Real>(a: &DMatrix<T>) -> Result<T> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| numeric("matrix is not symmetric positive definite"))?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        acc += l[(i, i)].ln();
    }
    Ok(acc + acc)
}

/// `(m + m^T) / 2`.
pub fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Maximum absolute entry of `a^T a - I`.
pub fn orthonormality_defect<T: Real>(a: &DMatrix<T>) -> T {
    let g = a.transpose() * a;
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0f64, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_abs_prefers_large_negative() {
        let m = DMatrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, 1.0]);
        let (vals, _) = sym_top_abs(&m, 1);
        assert_eq!(vals[0], -4.0);
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = randn(30, 4, &mut rng);
        let s = thin_svd(&a).unwrap();
        assert!(s.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let rec = &s.u * DMatrix::from_diagonal(&s.s) * s.v.transpose();
        assert!((rec - a).amax() < 1e-12);
    }

    #[test]
    fn spd_helpers() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        assert!((spd_log_det(&a).unwrap() - 11f64.ln()).abs() < 1e-14);
        let inv = spd_inverse(&a).unwrap();
        assert!((&a * inv - DMatrix::identity(2, 2)).amax() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_solve(&bad, &DMatrix::identity(2, 2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn orthonormalization_preserves_product(seed in any::<u64>(), n in 5usize..40, d in 4usize..20, r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = randn(n, r, &mut rng);
            let w = randn(d, r, &mut rng);
            let (g1, w1) = orthonormalize_factors(&g, &w).unwrap();
            prop_assert!((&g1 * w1.transpose() - &g * w.transpose()).amax() < 1e-10);
            prop_assert!(orthonormality_defect(&g1) < 1e-10);
        }
    }
}
