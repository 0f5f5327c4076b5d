use nalgebra::{DMatrix, DVector};

use super::{
    check_rank, sample_covariance, Estimator, FitOptions, IterationRecord, LowRankModel, Monitor,
};
use crate::data::CenteredData;
use crate::error::{numeric, Result};
use crate::linalg::{orthonormalize_factors, spd_solve, sym_eigen_desc};
use crate::scalar::Real;

/// ELF result with the factorization it converged to.
#[derive(Debug, Clone)]
pub struct ElfFit<T: Real> {
    /// Model with loadings scaled to per-observation units (`W / sqrt(n - 1)`).
    pub model: LowRankModel<T>,
    /// Semi-orthogonal scores `Gamma` (`n x r`, `Gamma^T Gamma = I`).
    pub scores: DMatrix<T>,
    /// Loadings with `X ~ Gamma W^T`.
    pub raw_loadings: DMatrix<T>,
    pub iterations: usize,
}

/// Estimation of latent factors: minimizes `||(X - Gamma W^T) psi^{-1/2}||_F`
/// subject to `Gamma^T Gamma = I_r`, alternating closed-form updates of `W`
/// and `Gamma` with re-orthonormalization and a residual-variance update of
/// the feature weights.
pub fn fit_elf<T: Real>(data: &CenteredData<T>, opts: &FitOptions<T>) -> Result<LowRankModel<T>> {
    fit_elf_monitored(data, opts, None).map(|f| f.model)
}

pub fn fit_elf_detailed<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
) -> Result<ElfFit<T>> {
    fit_elf_monitored(data, opts, None)
}

pub(crate) fn fit_elf_monitored<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
    mut monitor: Monitor<'_, T>,
) -> Result<ElfFit<T>> {
    opts.validate()?;
    let r = opts.rank;
    check_rank(data, r, true)?;
    let (n, d) = (data.n(), data.d());
    let floor = opts.floor(data)?;
    let x = data.values();
    let per_obs = T::one() / T::from_usize_lossy(n - 1).sqrt();

    // PCA start: loadings V_r, scores X V_r, unit weights.
    let (_, vecs) = sym_eigen_desc(&sample_covariance(data)?);
    let mut w = vecs.columns(0, r).into_owned();
    let mut gamma = x * &w;
    let mut psi = DVector::repeat(d, T::one());
    let mut residual = x - &gamma * w.transpose();

    let mut iterations = 0;
    for iter in 0..opts.iterations(Estimator::Elf) {
        iterations = iter + 1;
        let before = weighted_sum_sq(&residual, &psi);

        // W = X^T Gamma (Gamma^T Gamma)^{-1}
        let gram = gamma.tr_mul(&gamma);
        w = spd_solve(&gram, &gamma.tr_mul(x))
            .map_err(|_| numeric("rank-deficient scores"))?
            .transpose();

        // Gamma = X psi^{-1} W (W^T psi^{-1} W)^{-1}
        let mut w_scaled = w.clone();
        for (i, mut row) in w_scaled.row_iter_mut().enumerate() {
            row /= psi[i];
        }
        let precision = w.tr_mul(&w_scaled);
        gamma = spd_solve(&precision, &(x * &w_scaled).transpose())
            .map_err(|_| numeric("rank-deficient W^T psi^-1 W"))?
            .transpose();

        let (g1, w1) = orthonormalize_factors(&gamma, &w)?;
        gamma = g1;
        w = w1;

        residual = x - &gamma * w.transpose();
        let after = weighted_sum_sq(&residual, &psi);
        if let Some(mon) = monitor.as_deref_mut() {
            mon(&IterationRecord {
                iteration: iter,
                objective: after,
                objective_before: Some(before),
                loadings: &w * per_obs,
                noise_variances: psi.clone(),
            });
        }
        let denom = T::from_usize_lossy(n - 1);
        psi = DVector::from_iterator(
            d,
            residual
                .column_iter()
                .map(|c| (c.norm_squared() / denom).max(floor)),
        );
        // The first pass runs at unit weights from the unweighted optimum, so
        // only later passes can signal convergence.
        if iter > 0 && (before <= T::zero() || (before - after) / before < opts.tol) {
            break;
        }
    }

    let model = LowRankModel::new(data.mean().clone(), &w * per_obs, psi, Estimator::Elf)?;
    Ok(ElfFit {
        model,
        scores: gamma,
        raw_loadings: w,
        iterations,
    })
}

/// `||R psi^{-1/2}||_F^2` for a residual matrix `R`.
fn weighted_sum_sq<T: Real>(residual: &DMatrix<T>, psi: &DVector<T>) -> T {
    residual
        .column_iter()
        .enumerate()
        .map(|(j, c)| c.norm_squared() / psi[j])
        .fold(T::zero(), |a, b| a + b)
}
