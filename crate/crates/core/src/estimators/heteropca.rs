use nalgebra::{DMatrix, DVector};

use super::{
    check_rank, sample_covariance, Estimator, FitOptions, IterationRecord, LowRankModel, Monitor,
};
use crate::data::CenteredData;
use crate::error::Result;
use crate::linalg::{orthonormalize_factors, sym_top_abs};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct HeteroPcaFit<T: Real> {
    pub model: LowRankModel<T>,
    /// Estimated signal subspace `U_hat` (`d x r`, orthonormal columns).
    pub subspace: DMatrix<T>,
    /// Signal reconstruction `X_hat_0 = Gamma_hat W_hat^T`.
    pub reconstruction: DMatrix<T>,
    pub iterations: usize,
}

/// Heteroskedastic PCA followed by signal and noise estimation.
///
/// The diagonal of the sample covariance is replaced iteratively by the
/// diagonal of the best rank-`r` approximation of the current matrix, starting
/// from zero, until the imputed diagonal settles. The leading singular vectors
/// `U_hat` of the result give scores `X U_hat` which are orthonormalized into
/// `(Gamma_hat, W_hat)`; the noise variance of feature `j` is
/// `||(X_hat_0 - X)_{.j}||^2 / (n - 1)`.
pub fn fit_heteropca<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
) -> Result<LowRankModel<T>> {
    fit_heteropca_monitored(data, opts, None).map(|f| f.model)
}

pub fn fit_heteropca_detailed<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
) -> Result<HeteroPcaFit<T>> {
    fit_heteropca_monitored(data, opts, None)
}

pub(crate) fn fit_heteropca_monitored<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
    mut monitor: Monitor<'_, T>,
) -> Result<HeteroPcaFit<T>> {
    opts.validate()?;
    let r = opts.rank;
    check_rank(data, r, false)?;
    let d = data.d();
    let floor = opts.floor(data)?;

    let cov = sample_covariance(data)?;
    let scale = cov.diagonal().amax();
    let mut current = cov.clone();
    current.fill_diagonal(T::zero());

    let mut iterations = 0;
    for iter in 0..opts.iterations(Estimator::HeteroPca) {
        iterations = iter + 1;
        let (vals, vecs) = sym_top_abs(&current, r);
        let mut change = T::zero();
        for i in 0..d {
            let imputed = (0..r).fold(T::zero(), |acc, k| {
                acc + vals[k] * vecs[(i, k)] * vecs[(i, k)]
            });
            change = change.max((imputed - current[(i, i)]).abs());
            current[(i, i)] = imputed;
        }
        if let Some(mon) = monitor.as_deref_mut() {
            let (_, u) = sym_top_abs(&current, r);
            let (loadings, noise_variances, _) = post_process(data, &u, floor)?;
            mon(&IterationRecord {
                iteration: iter,
                objective: change,
                objective_before: None,
                loadings,
                noise_variances,
            });
        }
        if change < opts.tol * scale {
            break;
        }
    }

    let (_, subspace) = sym_top_abs(&current, r);
    let (loadings, noise, reconstruction) = post_process(data, &subspace, floor)?;
    let model = LowRankModel::new(data.mean().clone(), loadings, noise, Estimator::HeteroPca)?;
    Ok(HeteroPcaFit {
        model,
        subspace,
        reconstruction,
        iterations,
    })
}

/// Signal and noise estimates from a subspace: `Gamma~ = X U`, `W~ = U`,
/// orthonormalized; loadings returned in per-observation units.
fn post_process<T: Real>(
    data: &CenteredData<T>,
    u: &DMatrix<T>,
    floor: T,
) -> Result<(DMatrix<T>, DVector<T>, DMatrix<T>)> {
    let x = data.values();
    let n = data.n();
    let (gamma, w) = orthonormalize_factors(&(x * u), u)?;
    let reconstruction = &gamma * w.transpose();
    let denom = T::from_usize_lossy(n - 1);
    let noise = DVector::from_iterator(
        data.d(),
        (&reconstruction - x)
            .column_iter()
            .map(|c| (c.norm_squared() / denom).max(floor)),
    );
    let per_obs = T::one() / denom.sqrt();
    Ok((w * per_obs, noise, reconstruction))
}
