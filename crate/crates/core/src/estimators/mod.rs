//! Low-rank generative models `x = mu + W gamma + eps`, `cov(eps) = diag(psi)`,
//! and the four fitting procedures that produce them.
//!
//! Every fitter returns a [`LowRankModel`] whose loadings are in
//! per-observation units, so `W W^T + diag(psi)` is the implied covariance
//! for all estimators.

mod elf;
mod heteropca;
mod lfa;
mod ppca;
mod serialize;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::CenteredData;
use crate::error::{precondition, Error, Result};
use crate::linalg::symmetrize;
use crate::scalar::Real;

pub use elf::{fit_elf, fit_elf_detailed, ElfFit};
pub use heteropca::{fit_heteropca, fit_heteropca_detailed, HeteroPcaFit};
pub use lfa::{fit_lfa, gaussian_log_likelihood};
pub use ppca::fit_ppca;
pub use serialize::{decode_model, encode_model, read_model, write_model, SNRM_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ppca,
    Lfa,
    Elf,
    #[serde(rename = "heteropca")]
    HeteroPca,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Ppca,
        Estimator::Lfa,
        Estimator::Elf,
        Estimator::HeteroPca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ppca => "ppca",
            Estimator::Lfa => "lfa",
            Estimator::Elf => "elf",
            Estimator::HeteroPca => "heteropca",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Estimator::Ppca => 0,
            Estimator::Lfa => 1,
            Estimator::Elf => 2,
            Estimator::HeteroPca => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.tag() == tag)
    }

    /// Iteration cap used when [`FitOptions::max_iters`] is unset.
    pub fn default_max_iters(self) -> usize {
        match self {
            Estimator::Ppca => 1,
            Estimator::Lfa | Estimator::Elf => 500,
            Estimator::HeteroPca => 100,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| precondition(format!("unknown method {s:?} (ppca|lfa|elf|heteropca)")))
    }
}

/// Fitted `(mu, W, psi, r)` for one class under one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankModel<T: Real> {
    mean: DVector<T>,
    loadings: DMatrix<T>,
    noise_variances: DVector<T>,
    estimator: Estimator,
}

impl<T: Real> LowRankModel<T> {
    pub fn new(
        mean: DVector<T>,
        loadings: DMatrix<T>,
        noise_variances: DVector<T>,
        estimator: Estimator,
    ) -> Result<Self> {
        let (d, r) = loadings.shape();
        if mean.len() != d || noise_variances.len() != d {
            return Err(precondition(format!(
                "shape mismatch: mean {}, loadings {d}x{r}, noise {}",
                mean.len(),
                noise_variances.len()
            )));
        }
        if r == 0 || r >= d {
            return Err(precondition(format!(
                "rank {r} must satisfy 1 <= r < d = {d}"
            )));
        }
        if noise_variances
            .iter()
            .any(|&v| !v.is_positive_value() || !v.is_finite_value())
        {
            return Err(precondition("noise variances must be positive and finite"));
        }
        if mean
            .iter()
            .chain(loadings.iter())
            .any(|v| !v.is_finite_value())
        {
            return Err(Error::Numeric("non-finite model parameter".into()));
        }
        Ok(Self {
            mean,
            loadings,
            noise_variances,
            estimator,
        })
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn loadings(&self) -> &DMatrix<T> {
        &self.loadings
    }

    pub fn noise_variances(&self) -> &DVector<T> {
        &self.noise_variances
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn d(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn rank(&self) -> usize {
        self.loadings.ncols()
    }

    /// Row sums of squares of `W`: the per-feature signal variance.
    pub fn signal_variances(&self) -> DVector<T> {
        DVector::from_iterator(self.d(), self.loadings.row_iter().map(|r| r.norm_squared()))
    }

    /// `W W^T + diag(psi)`.
    pub fn covariance(&self) -> DMatrix<T> {
        let mut c = &self.loadings * self.loadings.transpose();
        for i in 0..self.d() {
            c[(i, i)] += self.noise_variances[i];
        }
        c
    }

    pub fn cast<U: Real>(&self) -> LowRankModel<U> {
        let c = |v: &T| U::lit(v.as_f64());
        LowRankModel {
            mean: self.mean.map(|v| c(&v)),
            loadings: self.loadings.map(|v| c(&v)),
            noise_variances: self.noise_variances.map(|v| c(&v)),
            estimator: self.estimator,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions<T: Real> {
    pub rank: usize,
    /// `None` uses [`Estimator::default_max_iters`].
    pub max_iters: Option<usize>,
    /// Relative convergence threshold.
    pub tol: T,
    pub seed: u64,
    /// `None` uses `1e-8` times the mean column variance of the data.
    pub variance_floor: Option<T>,
}

impl<T: Real> FitOptions<T> {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: None,
            tol: T::lit(1e-6),
            seed: 0,
            variance_floor: None,
        }
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = Some(iters);
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !self.tol.is_positive_value() {
            return Err(precondition("tol must be positive"));
        }
        if self.max_iters == Some(0) {
            return Err(precondition("max_iters must be at least 1"));
        }
        if let Some(f) = self.variance_floor {
            if !f.is_positive_value() {
                return Err(precondition("variance floor must be positive"));
            }
        }
        Ok(())
    }

    pub(crate) fn iterations(&self, est: Estimator) -> usize {
        self.max_iters.unwrap_or_else(|| est.default_max_iters())
    }

    pub(crate) fn floor(&self, data: &CenteredData<T>) -> Result<T> {
        match self.variance_floor {
            Some(f) => Ok(f),
            None => default_variance_floor(data),
        }
    }
}

/// Snapshot handed to a fit monitor after each iteration.
///
/// For LFA `objective` is the log-likelihood at the parameters the iteration
/// started from. For ELF it is the noise-weighted residual after the
/// `(W, Gamma)` update, and `objective_before` is the same quantity before
/// the update with the same weights. For HeteroPCA it is the largest change
/// of the imputed diagonal.
#[derive(Debug, Clone)]
pub struct IterationRecord<T: Real> {
    pub iteration: usize,
    pub objective: T,
    pub objective_before: Option<T>,
    pub loadings: DMatrix<T>,
    pub noise_variances: DVector<T>,
}

pub type Monitor<'a, T> = Option<&'a mut dyn FnMut(&IterationRecord<T>)>;

/// `X^T X / (n - 1)` for centered data.
pub fn sample_covariance<T: Real>(data: &CenteredData<T>) -> Result<DMatrix<T>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs n >= 2, got {n}"
        )));
    }
    let x = data.values();
    let mut s = x.tr_mul(x) / T::from_usize_lossy(n - 1);
    symmetrize(&mut s);
    Ok(s)
}

/// `1e-8` times the mean column variance.
pub fn default_variance_floor<T: Real>(data: &CenteredData<T>) -> Result<T> {
    let mean_var = data.column_variances().mean();
    if !mean_var.is_positive_value() {
        return Err(Error::Degenerate("all columns are constant".into()));
    }
    Ok(mean_var * T::lit(1e-8))
}

pub(crate) fn check_rank<T: Real>(
    data: &CenteredData<T>,
    rank: usize,
    allow_rank_eq_n: bool,
) -> Result<()> {
    let (n, d) = (data.n(), data.d());
    if rank == 0 || rank >= d {
        return Err(precondition(format!(
            "rank {rank} must satisfy 1 <= r < d = {d}"
        )));
    }
    let n_ok = if allow_rank_eq_n { rank <= n } else { rank < n };
    if !n_ok {
        return Err(precondition(format!("rank {rank} too large for n = {n}")));
    }
    Ok(())
}

/// Fits the chosen estimator.
pub fn fit<T: Real>(
    est: Estimator,
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
) -> Result<LowRankModel<T>> {
    fit_monitored(est, data, opts, None)
}

pub fn fit_monitored<T: Real>(
    est: Estimator,
    data: &CenteredData<T>,
    opts: &FitOptions<T>,
    monitor: Monitor<'_, T>,
) -> Result<LowRankModel<T>> {
    match est {
        Estimator::Ppca => {
            let m = fit_ppca(data, opts)?;
            if let Some(mon) = monitor {
                mon(&IterationRecord {
                    iteration: 0,
                    objective: T::zero(),
                    objective_before: None,
                    loadings: m.loadings().clone(),
                    noise_variances: m.noise_variances().clone(),
                });
            }
            Ok(m)
        }
        Estimator::Lfa => lfa::fit_lfa_monitored(data, opts, monitor),
        Estimator::Elf => elf::fit_elf_monitored(data, opts, monitor).map(|f| f.model),
        Estimator::HeteroPca => {
            heteropca::fit_heteropca_monitored(data, opts, monitor).map(|f| f.model)
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use crate::data::{center, CenteredData, DataMatrix};

    pub fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    /// Factor-model data with per-feature noise standard deviations `sd`.
    pub fn factor_data(n: usize, w: &DMatrix<f64>, sd: &[f64], seed: u64) -> CenteredData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = randn(n, w.ncols(), &mut rng);
        let mut x = g * w.transpose();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v += sd[j] * rng.sample::<f64, _>(StandardNormal);
            }
        }
        center(&DataMatrix::unlabeled(x).unwrap()).unwrap()
    }
}
