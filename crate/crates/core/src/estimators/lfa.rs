use nalgebra::{DMatrix, DVector};

use super::{
    check_rank, sample_covariance, Estimator, FitOptions, IterationRecord, LowRankModel, Monitor,
};
use crate::data::CenteredData;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_log_det, sym_eigen_desc, symmetrize};
use crate::scalar::Real;

/// Latent factor analysis by EM.
///
/// The per-observation E-step quantities only enter the M-step through their
/// sums, so the updates are carried out on the second-moment matrix
/// `C = X^T X / n`:
///
/// ```text
/// beta       = W^T (psi + W W^T)^{-1}
/// sum E[g]x^T = n beta C
/// sum E[gg^T] = n (I - beta W + beta C beta^T)
/// W_new      = C beta^T (I - beta W + beta C beta^T)^{-1}
/// psi_new    = diag(C - W_new beta C)
/// ```
pub fn fit_lfa<T: Real>(data: &CenteredData<T>, opts: &FitOptions<T>) -> Result<LowRankModel<T>> {
    fit_lfa_monitored(data, opts, None)
}

pub(crate) fn fit_lfa_monitored<T: Real>(
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
    mut monitor: Monitor<'_, T>,
) -> Result<LowRankModel<T>> {
    opts.validate()?;
    let r = opts.rank;
    check_rank(data, r, false)?;
    let (n, d) = (data.n(), data.d());
    let floor = opts.floor(data)?;
    let x = data.values();
    let mut moment = x.tr_mul(x) / T::from_usize_lossy(n);
    symmetrize(&mut moment);

    // PCA start: W = U_r S_r^{1/2}, psi = residual variances.
    let cov = sample_covariance(data)?;
    let (vals, vecs) = sym_eigen_desc(&cov);
    let mut w = DMatrix::zeros(d, r);
    for k in 0..r {
        w.set_column(k, &(vecs.column(k) * vals[k].max(T::zero()).sqrt()));
    }
    let mut psi = DVector::from_fn(d, |i, _| (cov[(i, i)] - w.row(i).norm_squared()).max(floor));

    let slack = T::lit(1e-8);
    let mut prev: Option<T> = None;
    for iter in 0..opts.iterations(Estimator::Lfa) {
        let step = em_step(&moment, &w, &psi)?;
        let ll = step.log_likelihood * T::from_usize_lossy(n);
        if let Some(mon) = monitor.as_deref_mut() {
            mon(&IterationRecord {
                iteration: iter,
                objective: ll,
                objective_before: prev,
                loadings: w.clone(),
                noise_variances: psi.clone(),
            });
        }
        if let Some(p) = prev {
            if ll < p - slack * p.abs().max(T::one()) {
                return Err(Error::Consistency(format!(
                    "EM log-likelihood decreased at iteration {iter}: {p} -> {ll}"
                )));
            }
            if (ll - p).abs() < opts.tol * p.abs() {
                break;
            }
        }
        prev = Some(ll);
        w = step.loadings;
        psi = step.noise.map(|v| v.max(floor));
    }
    LowRankModel::new(data.mean().clone(), w, psi, Estimator::Lfa)
}

struct EmStep<T: Real> {
    /// Average log-likelihood of the parameters the step started from.
    log_likelihood: T,
    loadings: DMatrix<T>,
    noise: DVector<T>,
}

fn em_step<T: Real>(moment: &DMatrix<T>, w: &DMatrix<T>, psi: &DVector<T>) -> Result<EmStep<T>> {
    let (d, r) = w.shape();
    let psi_inv = psi.map(|v| T::one() / v);
    // A = psi^{-1} W ; M = I + W^T A ; beta = M^{-1} A^T ; I - beta W = M^{-1}
    let mut a = w.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= psi_inv[i];
    }
    let mut m = DMatrix::identity(r, r) + w.tr_mul(&a);
    symmetrize(&mut m);
    let m_inv = spd_inverse(&m).map_err(|_| Error::Numeric("singular latent precision".into()))?;
    let beta = &m_inv * a.transpose();
    let beta_c = &beta * moment;

    let log_likelihood = {
        let log_det = psi.iter().map(|v| v.ln()).fold(T::zero(), |s, v| s + v) + spd_log_det(&m)?;
        let c_a = moment * &a;
        let inner = (&m_inv * a.tr_mul(&c_a)).trace();
        let trace = (0..d)
            .map(|i| moment[(i, i)] * psi_inv[i])
            .fold(T::zero(), |s, v| s + v)
            - inner;
        -(T::from_usize_lossy(d) * T::two_pi().ln() + log_det + trace) * T::lit(0.5)
    };

    let mut egg = &m_inv + &beta_c * beta.transpose();
    symmetrize(&mut egg);
    let egg_inv = spd_inverse(&egg).map_err(|_| Error::Numeric("singular latent moment".into()))?;
    let loadings = beta_c.transpose() * egg_inv;
    let noise = DVector::from_fn(d, |i, _| {
        moment[(i, i)] - loadings.row(i).dot(&beta_c.column(i).transpose())
    });
    Ok(EmStep {
        log_likelihood,
        loadings,
        noise,
    })
}

/// Total Gaussian log-likelihood of centered data under `N(0, W W^T + diag(psi))`,
/// computed densely.
pub fn gaussian_log_likelihood<T: Real>(
    data: &CenteredData<T>,
    model: &LowRankModel<T>,
) -> Result<T> {
    let sigma = model.covariance();
    let log_det = spd_log_det(&sigma)?;
    let inv = spd_inverse(&sigma)?;
    let x = data.values();
    let quad = (x * inv).component_mul(x).sum();
    let n = T::from_usize_lossy(data.n());
    let d = T::from_usize_lossy(data.d());
    Ok(-(n * (d * T::two_pi().ln() + log_det) + quad) * T::lit(0.5))
}
