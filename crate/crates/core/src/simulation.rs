//! Synthetic factor-model data with ten known signal features.
//!
//! The first ten features load on `r` standard-normal factors and have
//! prescribed SNRs; the remaining `d_noise` features are pure noise with
//! variances drawn from `Uniform(r / 1.4, r / 0.5)`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{precondition, Result};

/// Number of signal features.
pub const N_SIGNAL: usize = 10;

/// Generator name recorded in output metadata.
pub const RNG_NAME: &str = "chacha8";

const STREAM_LOADINGS: u64 = 0;
const STREAM_NOISE_VARIANCES: u64 = 1;
const STREAM_FACTORS: u64 = 2;
const STREAM_ERRORS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub d_noise: usize,
    pub rank: usize,
    pub seed: u64,
    pub snr_profile: Vec<f64>,
}

impl SimSpec {
    /// Rank 3 and SNRs `0.5, 0.6, ..., 1.4`.
    pub fn new(n: usize, d_noise: usize, seed: u64) -> Self {
        Self {
            n,
            d_noise,
            rank: 3,
            seed,
            snr_profile: default_snr_profile(),
        }
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn d(&self) -> usize {
        N_SIGNAL + self.d_noise
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(precondition(format!("n = {} must be at least 2", self.n)));
        }
        if self.rank == 0 {
            return Err(precondition("rank must be positive"));
        }
        if self.snr_profile.len() != N_SIGNAL {
            return Err(precondition(format!(
                "snr_profile needs {N_SIGNAL} entries, got {}",
                self.snr_profile.len()
            )));
        }
        if self
            .snr_profile
            .iter()
            .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return Err(precondition(
                "snr_profile entries must be positive and finite",
            ));
        }
        Ok(())
    }
}

pub fn default_snr_profile() -> Vec<f64> {
    (0..N_SIGNAL).map(|i| 0.5 + i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// `d x r`, zero below row 10.
    pub w_true: DMatrix<f64>,
    pub psi_true: DVector<f64>,
    pub true_indices: Vec<usize>,
    pub snr_true: DVector<f64>,
}

impl SimTruth {
    /// `sig_i = sum_j W_true[i, j]^2`.
    pub fn signal_variances(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.w_true.nrows(),
            self.w_true.row_iter().map(|r| r.norm_squared()),
        )
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a data set and its ground truth. Each random component has its own
/// ChaCha8 stream, so the loadings do not depend on `n` and the factors do
/// not depend on `d_noise`.
pub fn generate(spec: &SimSpec) -> Result<(DataMatrix<f64>, SimTruth)> {
    spec.validate()?;
    let (n, d, r) = (spec.n, spec.d(), spec.rank);

    let mut rng = stream(spec.seed, STREAM_LOADINGS);
    let mut w = DMatrix::zeros(d, r);
    for i in 0..N_SIGNAL {
        for k in 0..r {
            w[(i, k)] = rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut rng = stream(spec.seed, STREAM_NOISE_VARIANCES);
    let r_f = r as f64;
    let noise_dist = Uniform::new_inclusive(r_f / 1.4, r_f / 0.5).expect("valid bounds");
    let mut psi = DVector::zeros(d);
    let mut snr = DVector::zeros(d);
    for i in 0..d {
        if i < N_SIGNAL {
            let sig = w.row(i).norm_squared();
            psi[i] = sig / spec.snr_profile[i];
            snr[i] = sig / psi[i];
        } else {
            psi[i] = noise_dist.sample(&mut rng);
        }
    }

    let mut rng = stream(spec.seed, STREAM_FACTORS);
    let mut gamma = DMatrix::zeros(n, r);
    for i in 0..n {
        for k in 0..r {
            gamma[(i, k)] = rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut x = &gamma * w.transpose();
    let mut rng = stream(spec.seed, STREAM_ERRORS);
    let sd = psi.map(f64::sqrt);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] += sd[j] * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let truth = SimTruth {
        w_true: w,
        psi_true: psi,
        true_indices: (0..N_SIGNAL).collect(),
        snr_true: snr,
    };
    Ok((DataMatrix::unlabeled(x)?, truth))
}

/// Seed for one run of an experiment, derived from a master seed and a key
/// such as `(n, d_noise, run)` by chained splitmix64.
pub fn run_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `(1/d) sum_j |theta_hat_j - theta_true_j|`.
pub fn mad(theta_hat: &DVector<f64>, theta_true: &DVector<f64>) -> Result<f64> {
    if theta_hat.len() != theta_true.len() {
        return Err(precondition(format!(
            "length mismatch: {} vs {}",
            theta_hat.len(),
            theta_true.len()
        )));
    }
    if theta_hat.is_empty() {
        return Err(precondition("empty vectors"));
    }
    let total: f64 = theta_hat
        .iter()
        .zip(theta_true.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / theta_hat.len() as f64)
}

#[derive(Serialize)]
struct TruthFile<'a> {
    tool_version: &'static str,
    rng: &'static str,
    seed: u64,
    n: usize,
    d_noise: usize,
    rank: usize,
    snr_profile: &'a [f64],
    true_indices: &'a [usize],
    /// Row-major, one inner array per feature.
    w_true: Vec<Vec<f64>>,
    psi_true: &'a [f64],
    snr_true: &'a [f64],
}

/// JSON sidecar describing the ground truth of a generated data set.
pub fn truth_json(spec: &SimSpec, truth: &SimTruth) -> Result<Vec<u8>> {
    let file = TruthFile {
        tool_version: env!("CARGO_PKG_VERSION"),
        rng: RNG_NAME,
        seed: spec.seed,
        n: spec.n,
        d_noise: spec.d_noise,
        rank: spec.rank,
        snr_profile: &spec.snr_profile,
        true_indices: &truth.true_indices,
        w_true: truth
            .w_true
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        psi_true: truth.psi_true.as_slice(),
        snr_true: truth.snr_true.as_slice(),
    };
    let mut out = serde_json::to_vec_pretty(&file)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_truth(spec: &SimSpec, truth: &SimTruth, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, truth_json(spec, truth)?)?;
    Ok(())
}
