use nalgebra::{DMatrix, DVector};

use super::{check_rank, sample_covariance, Estimator, FitOptions, LowRankModel};
use crate::data::CenteredData;
use crate::error::Result;
use crate::linalg::sym_eigen_desc;
use crate::scalar::Real;

/// Closed-form maximum likelihood probabilistic PCA.
///
/// `sigma^2` is the mean of the trailing `d - r` eigenvalues of the sample
/// covariance and `W = U_r (S_r - sigma^2 I)^{1/2}` with the rotation fixed to
/// the identity. Eigenvalues below `sigma^2` give a zero loading column.
pub fn fit_ppca<T: Real>(data: &CenteredData<T>, opts: &FitOptions<T>) -> Result<LowRankModel<T>> {
    opts.validate()?;
    let r = opts.rank;
    check_rank(data, r, false)?;
    let d = data.d();
    let floor = opts.floor(data)?;

    let cov = sample_covariance(data)?;
    let (vals, vecs) = sym_eigen_desc(&cov);
    let tail = vals.rows(r, d - r).sum() / T::from_usize_lossy(d - r);
    let sigma2 = tail.max(T::zero());

    let mut w = DMatrix::zeros(d, r);
    for k in 0..r {
        let scale = (vals[k] - sigma2).max(T::zero()).sqrt();
        w.set_column(k, &(vecs.column(k) * scale));
    }
    LowRankModel::new(
        data.mean().clone(),
        w,
        DVector::repeat(d, sigma2.max(floor)),
        Estimator::Ppca,
    )
}
