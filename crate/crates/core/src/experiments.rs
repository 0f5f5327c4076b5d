//! Simulation studies and the classify-at-`m`-features sweep.
//!
//! Every run draws its data from a seed derived from the master seed and the
//! run's `(n, d_noise, run)` key, so all methods see the same data sets and
//! results do not depend on thread count or scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassModel, ClassifierBank};
use crate::data::{center, partition_by_class, DataMatrix};
use crate::error::{precondition, Error, Result};
use crate::estimators::{fit, fit_monitored, Estimator, FitOptions, IterationRecord, LowRankModel};
use crate::simulation::{generate, mad, run_seed, SimSpec, SimTruth, N_SIGNAL, RNG_NAME};
use crate::snr::{compute_snr, recovery_accuracy, select_top_m};

/// First line of every CSV artifact.
pub fn metadata_line(seed: u64, runs: usize) -> String {
    format!(
        "# snrsel {} seed={seed} R={runs} rng={RNG_NAME}\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// Estimator settings shared by the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub rank: usize,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            rank: 3,
            tol: None,
            max_iters: None,
        }
    }
}

impl FitSettings {
    pub fn options(&self, seed: u64) -> FitOptions<f64> {
        let mut o = FitOptions::new(self.rank).with_seed(seed);
        if let Some(t) = self.tol {
            o = o.with_tol(t);
        }
        if let Some(m) = self.max_iters {
            o = o.with_max_iters(m);
        }
        o
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_grid(n_values: &[usize], methods: &[Estimator], runs: usize) -> Result<()> {
    if runs == 0 {
        return Err(precondition("runs must be at least 1"));
    }
    if n_values.is_empty() || methods.is_empty() {
        return Err(precondition("need at least one n value and one method"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryGridConfig {
    pub n_values: Vec<usize>,
    pub noise_values: Vec<usize>,
    pub methods: Vec<Estimator>,
    pub runs: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub fit: FitSettings,
}

impl Default for RecoveryGridConfig {
    fn default() -> Self {
        Self {
            n_values: vec![50, 100, 300, 1000],
            noise_values: vec![10, 50, 100],
            methods: Estimator::ALL.to_vec(),
            runs: 50,
            seed: 0,
            fit: FitSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCell {
    pub method: Estimator,
    pub n: usize,
    pub d_noise: usize,
    /// Per-run accuracy in percent, in run order; failed runs are absent.
    pub accuracies: Vec<f64>,
    /// `(run, message)` for each failed fit.
    pub failures: Vec<(usize, String)>,
}

impl RecoveryCell {
    /// Mean accuracy in percent over successful runs.
    pub fn mean(&self) -> f64 {
        mean_se(&self.accuracies).0
    }

    pub fn standard_error(&self) -> f64 {
        mean_se(&self.accuracies).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryGrid {
    pub config: RecoveryGridConfig,
    pub cells: Vec<RecoveryCell>,
}

impl RecoveryGrid {
    pub fn cell(&self, method: Estimator, n: usize, d_noise: usize) -> Option<&RecoveryCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.n == n && c.d_noise == d_noise)
    }

    /// Table-shaped CSV: one row per `(method, noise)`, and per `n` the mean
    /// accuracy, its standard error and the number of failed runs.
    pub fn to_csv(&self) -> String {
        let cfg = &self.config;
        let mut out = metadata_line(cfg.seed, cfg.runs);
        out.push_str("method,noise");
        for n in &cfg.n_values {
            write!(out, ",acc_n{n},se_n{n},failed_n{n}").unwrap();
        }
        out.push('\n');
        for &method in &cfg.methods {
            for &noise in &cfg.noise_values {
                write!(out, "{method},{noise}").unwrap();
                for &n in &cfg.n_values {
                    let c = self.cell(method, n, noise).expect("every cell is computed");
                    write!(
                        out,
                        ",{:.4},{:.4},{}",
                        c.mean(),
                        c.standard_error(),
                        c.failures.len()
                    )
                    .unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}

/// One simulated data set per `(n, d_noise, run)`, shared by all methods.
fn simulate_run(
    seed: u64,
    n: usize,
    d_noise: usize,
    run: usize,
    rank: usize,
) -> Result<(DataMatrix<f64>, SimTruth)> {
    let s = run_seed(seed, &[n as u64, d_noise as u64, run as u64]);
    generate(&SimSpec::new(n, d_noise, s).with_rank(rank))
}

/// Recovery accuracy of top-10 SNR selection for every method, `n` and noise
/// level, averaged over `runs` simulated data sets.
pub fn run_recovery_grid(cfg: &RecoveryGridConfig) -> Result<RecoveryGrid> {
    check_grid(&cfg.n_values, &cfg.methods, cfg.runs)?;
    let tasks: Vec<(usize, usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| {
            cfg.noise_values
                .iter()
                .flat_map(move |&noise| (0..cfg.runs).map(move |run| (n, noise, run)))
        })
        .collect();
    let truth: Vec<usize> = (0..N_SIGNAL).collect();

    let results: Vec<Vec<Result<f64>>> = tasks
        .par_iter()
        .map(
            |&(n, noise, run)| match simulate_run(cfg.seed, n, noise, run, cfg.fit.rank) {
                Err(e) => cfg
                    .methods
                    .iter()
                    .map(|_| Err(Error::Precondition(e.to_string())))
                    .collect(),
                Ok((x, _)) => {
                    let centered = center(&x);
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let c = centered
                                .as_ref()
                                .map_err(|e| Error::Degenerate(e.to_string()))?;
                            let model = fit(method, c, &cfg.fit.options(cfg.seed))?;
                            let ranking = select_top_m(&compute_snr(&model), N_SIGNAL.min(x.d()))?;
                            Ok(100.0 * recovery_accuracy(&truth, ranking.selected())?)
                        })
                        .collect()
                }
            },
        )
        .collect();

    let mut cells: BTreeMap<(usize, usize, usize), RecoveryCell> = BTreeMap::new();
    for (&(n, noise, run), per_method) in tasks.iter().zip(results) {
        for (mi, (res, &method)) in per_method.into_iter().zip(&cfg.methods).enumerate() {
            let cell = cells.entry((mi, n, noise)).or_insert_with(|| RecoveryCell {
                method,
                n,
                d_noise: noise,
                accuracies: Vec::new(),
                failures: Vec::new(),
            });
            match res {
                Ok(a) => cell.accuracies.push(a),
                Err(e) => cell.failures.push((run, e.to_string())),
            }
        }
    }
    Ok(RecoveryGrid {
        config: cfg.clone(),
        cells: cells.into_values().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub n_values: Vec<usize>,
    pub d_noise: usize,
    pub methods: Vec<Estimator>,
    pub runs: usize,
    pub seed: u64,
    /// Sample size of the single-seed iteration trace; the largest `n` if unset.
    pub trace_n: Option<usize>,
    #[serde(flatten)]
    pub fit: FitSettings,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            n_values: vec![50, 100, 300, 1000],
            d_noise: 100,
            methods: Estimator::ALL.to_vec(),
            runs: 50,
            seed: 0,
            trace_n: None,
            fit: FitSettings::default(),
        }
    }
}

/// Mean absolute deviations of the estimated signal variances, noise
/// variances and SNRs from the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterErrors {
    pub sig: f64,
    pub psi: f64,
    pub snr: f64,
}

impl ParameterErrors {
    pub fn of(model: &LowRankModel<f64>, truth: &SimTruth) -> Result<Self> {
        Self::from_parts(&model.signal_variances(), model.noise_variances(), truth)
    }

    fn from_parts(sig: &DVector<f64>, psi: &DVector<f64>, truth: &SimTruth) -> Result<Self> {
        Ok(Self {
            sig: mad(sig, &truth.signal_variances())?,
            psi: mad(psi, &truth.psi_true)?,
            snr: mad(&sig.component_div(psi), &truth.snr_true)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationPoint {
    pub method: Estimator,
    pub n: usize,
    pub errors: Vec<ParameterErrors>,
    pub failures: Vec<(usize, String)>,
}

impl EstimationPoint {
    /// Mean and standard error of each MAD over successful runs.
    pub fn summary(&self) -> [(f64, f64); 3] {
        let pick = |f: fn(&ParameterErrors) -> f64| {
            mean_se(&self.errors.iter().map(f).collect::<Vec<_>>())
        };
        [pick(|e| e.sig), pick(|e| e.psi), pick(|e| e.snr)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub method: Estimator,
    pub iteration: usize,
    pub objective: f64,
    pub errors: ParameterErrors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationCurves {
    pub config: EstimationConfig,
    pub points: Vec<EstimationPoint>,
    pub trace: Vec<TracePoint>,
}

impl EstimationCurves {
    pub fn point(&self, method: Estimator, n: usize) -> Option<&EstimationPoint> {
        self.points.iter().find(|p| p.method == method && p.n == n)
    }

    pub fn curves_csv(&self) -> String {
        let mut out = metadata_line(self.config.seed, self.config.runs);
        out.push_str("method,n,mad_sig,se_sig,mad_psi,se_psi,mad_snr,se_snr,failed\n");
        for p in &self.points {
            let [s, ps, sn] = p.summary();
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                p.method,
                p.n,
                s.0,
                s.1,
                ps.0,
                ps.1,
                sn.0,
                sn.1,
                p.failures.len()
            )
            .unwrap();
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = metadata_line(self.config.seed, 1);
        out.push_str("method,iteration,objective,mad_sig,mad_psi,mad_snr\n");
        for t in &self.trace {
            writeln!(
                out,
                "{},{},{:.10e},{:.6},{:.6},{:.6}",
                t.method, t.iteration, t.objective, t.errors.sig, t.errors.psi, t.errors.snr
            )
            .unwrap();
        }
        out
    }
}

/// Estimation error of signal variances, noise variances and SNRs as a
/// function of `n`, plus a per-iteration error trace for one data set.
pub fn run_estimation_curves(cfg: &EstimationConfig) -> Result<EstimationCurves> {
    check_grid(&cfg.n_values, &cfg.methods, cfg.runs)?;
    let tasks: Vec<(usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.runs).map(move |run| (n, run)))
        .collect();
    let results: Vec<Vec<Result<ParameterErrors>>> = tasks
        .par_iter()
        .map(
            |&(n, run)| match simulate_run(cfg.seed, n, cfg.d_noise, run, cfg.fit.rank) {
                Err(e) => cfg
                    .methods
                    .iter()
                    .map(|_| Err(Error::Precondition(e.to_string())))
                    .collect(),
                Ok((x, truth)) => {
                    let centered = center(&x);
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let c = centered
                                .as_ref()
                                .map_err(|e| Error::Degenerate(e.to_string()))?;
                            ParameterErrors::of(
                                &fit(method, c, &cfg.fit.options(cfg.seed))?,
                                &truth,
                            )
                        })
                        .collect()
                }
            },
        )
        .collect();

    let mut points: BTreeMap<(usize, usize), EstimationPoint> = BTreeMap::new();
    for (&(n, run), per_method) in tasks.iter().zip(results) {
        for (mi, (res, &method)) in per_method.into_iter().zip(&cfg.methods).enumerate() {
            let p = points.entry((mi, n)).or_insert_with(|| EstimationPoint {
                method,
                n,
                errors: Vec::new(),
                failures: Vec::new(),
            });
            match res {
                Ok(e) => p.errors.push(e),
                Err(e) => p.failures.push((run, e.to_string())),
            }
        }
    }

    let trace_n = cfg
        .trace_n
        .unwrap_or_else(|| *cfg.n_values.iter().max().expect("non-empty"));
    let (x, truth) = simulate_run(cfg.seed, trace_n, cfg.d_noise, 0, cfg.fit.rank)?;
    let centered = center(&x)?;
    let traces: Vec<Result<Vec<TracePoint>>> = cfg
        .methods
        .par_iter()
        .map(|&method| {
            let mut records = Vec::new();
            let mut failure = None;
            let mut mon = |rec: &IterationRecord<f64>| {
                let sig = DVector::from_iterator(
                    rec.loadings.nrows(),
                    rec.loadings.row_iter().map(|r| r.norm_squared()),
                );
                match ParameterErrors::from_parts(&sig, &rec.noise_variances, &truth) {
                    Ok(errors) => records.push(TracePoint {
                        method,
                        iteration: rec.iteration,
                        objective: rec.objective,
                        errors,
                    }),
                    Err(e) => failure = Some(e),
                }
            };
            fit_monitored(
                method,
                &centered,
                &cfg.fit.options(cfg.seed),
                Some(&mut mon),
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(records),
            }
        })
        .collect();
    let mut trace = Vec::new();
    for t in traces {
        trace.extend(t?);
    }

    Ok(EstimationCurves {
        config: cfg.clone(),
        points: points.into_values().collect(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: Estimator,
    /// `(m, accuracy in percent)` in the order requested.
    pub accuracy: Vec<(usize, f64)>,
    pub n_test: usize,
    /// Classes left out of the bank because their model could not be fitted.
    pub class_errors: Vec<(u32, String)>,
}

/// Per-class feature counts capped at the data dimension.
fn check_sweep(train: &DataMatrix<f64>, test: &DataMatrix<f64>, m_values: &[usize]) -> Result<()> {
    if train.labels().is_none() || test.labels().is_none() {
        return Err(precondition("train and test data must be labeled"));
    }
    if train.d() != test.d() {
        return Err(precondition(format!(
            "train has {} features, test has {}",
            train.d(),
            test.d()
        )));
    }
    if m_values.is_empty() || m_values.iter().any(|&m| m == 0 || m > train.d()) {
        return Err(precondition(format!(
            "every m must be in 1..={}",
            train.d()
        )));
    }
    Ok(())
}

/// Fits one model per class of `train`, then for each `m` selects the top-`m`
/// SNR features per class from the same ranking and reports test accuracy.
pub fn run_classification_sweep(
    train: &DataMatrix<f64>,
    test: &DataMatrix<f64>,
    method: Estimator,
    m_values: &[usize],
    opts: &FitOptions<f64>,
) -> Result<SweepResult> {
    check_sweep(train, test, m_values)?;
    let classes: Vec<(u32, DataMatrix<f64>)> = partition_by_class(train)?.into_iter().collect();
    let fits: Vec<(u32, Result<LowRankModel<f64>>)> = classes
        .par_iter()
        .map(|(id, x)| {
            let res = if x.n() < opts.rank + 1 {
                Err(precondition(format!(
                    "class {id} has {} samples, needs at least {}",
                    x.n(),
                    opts.rank + 1
                )))
            } else {
                center(x).and_then(|c| fit(method, &c, opts))
            };
            (*id, res)
        })
        .collect();

    let mut models = Vec::new();
    let mut class_errors = Vec::new();
    for (id, res) in fits {
        match res {
            Ok(m) => models.push((id, compute_snr(&m), m)),
            Err(e) => class_errors.push((id, e.to_string())),
        }
    }
    if models.is_empty() {
        return Err(Error::Degenerate("no class model could be fitted".into()));
    }

    let labels = test.labels().expect("checked");
    let x = test.values();
    let mut accuracy = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let bank = ClassifierBank::from_classes(
            models
                .iter()
                .map(|(id, snr, model)| {
                    ClassModel::build(*id, model.clone(), select_top_m(snr, m)?)
                })
                .collect::<Result<Vec<_>>>()?,
        )?;
        let correct: Vec<bool> = (0..test.n())
            .into_par_iter()
            .map(|i| {
                bank.predict(&x.row(i).transpose())
                    .map(|p| p.class_id == labels[i])
            })
            .collect::<Result<_>>()?;
        let hits = correct.iter().filter(|&&c| c).count();
        accuracy.push((m, 100.0 * hits as f64 / test.n() as f64));
    }
    Ok(SweepResult {
        method,
        accuracy,
        n_test: test.n(),
        class_errors,
    })
}

pub fn sweep_csv(results: &[SweepResult], seed: u64) -> String {
    let mut out = metadata_line(seed, 1);
    out.push_str("method,m,accuracy,n_test,failed_classes\n");
    for r in results {
        for &(m, acc) in &r.accuracy {
            writeln!(
                out,
                "{},{m},{acc:.4},{},{}",
                r.method,
                r.n_test,
                r.class_errors.len()
            )
            .unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Estimator,
    pub seconds: Vec<f64>,
    pub mean_seconds: f64,
    /// Standard deviation over mean; 0 for a single repeat.
    pub coefficient_of_variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub tool_version: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub repeats: usize,
    pub methods: Vec<MethodTiming>,
}

impl TimingReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Wall-clock time of fit plus SNR ranking for each method, repeated
/// `repeats` times on the pooled (all-class) data.
pub fn timing_report(
    dataset: &str,
    data: &DataMatrix<f64>,
    methods: &[Estimator],
    opts: &FitOptions<f64>,
    repeats: usize,
) -> Result<TimingReport> {
    if repeats == 0 {
        return Err(precondition("repeats must be at least 1"));
    }
    let centered = center(data)?;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut seconds = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let model = fit(method, &centered, opts)?;
            let ranking = select_top_m(&compute_snr(&model), data.d())?;
            std::hint::black_box(ranking);
            seconds.push(start.elapsed().as_secs_f64());
        }
        let (mean, se) = mean_se(&seconds);
        let sd = se * (seconds.len() as f64).sqrt();
        out.push(MethodTiming {
            method,
            mean_seconds: mean,
            coefficient_of_variation: if mean > 0.0 { sd / mean } else { 0.0 },
            seconds,
        });
    }
    Ok(TimingReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dataset: dataset.to_string(),
        n: data.n(),
        d: data.d(),
        rank: opts.rank,
        repeats,
        methods: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn small_grid() -> RecoveryGridConfig {
        RecoveryGridConfig {
            n_values: vec![100, 400],
            noise_values: vec![0, 10],
            methods: Estimator::ALL.to_vec(),
            runs: 4,
            seed: 11,
            fit: FitSettings::default(),
        }
    }

    #[test]
    fn mean_se_values() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_noise_features_is_perfect() {
        let grid = run_recovery_grid(&small_grid()).unwrap();
        for method in Estimator::ALL {
            for n in [100, 400] {
                let c = grid.cell(method, n, 0).unwrap();
                assert!(c.failures.is_empty());
                assert_eq!(c.mean(), 100.0);
            }
        }
    }

    #[test]
    fn grid_reproducible_and_thread_independent() {
        let cfg = small_grid();
        let a = run_recovery_grid(&cfg).unwrap().to_csv();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_recovery_grid(&cfg).unwrap().to_csv());
        assert_eq!(a, b);
        assert!(a.starts_with("# snrsel "));
        let header = a.lines().nth(1).unwrap();
        assert_eq!(
            header,
            "method,noise,acc_n100,se_n100,failed_n100,acc_n400,se_n400,failed_n400"
        );
        assert_eq!(a.lines().count(), 2 + 4 * 2);
    }

    #[test]
    fn grid_rejects_zero_runs() {
        let mut cfg = small_grid();
        cfg.runs = 0;
        assert!(run_recovery_grid(&cfg).is_err());
    }

    #[test]
    fn fit_failures_recorded_per_cell() {
        let mut cfg = small_grid();
        cfg.n_values = vec![3, 100];
        cfg.noise_values = vec![10];
        cfg.runs = 2;
        let grid = run_recovery_grid(&cfg).unwrap();
        // rank 3 needs more than 3 observations
        assert_eq!(grid.cell(Estimator::Lfa, 3, 10).unwrap().failures.len(), 2);
        assert!(grid
            .cell(Estimator::Lfa, 100, 10)
            .unwrap()
            .failures
            .is_empty());
    }

    #[test]
    fn estimation_errors_shrink_with_n() {
        let cfg = EstimationConfig {
            n_values: vec![50, 1000],
            d_noise: 100,
            methods: vec![Estimator::Lfa, Estimator::Ppca],
            runs: 6,
            seed: 3,
            trace_n: Some(200),
            fit: FitSettings::default(),
        };
        let curves = run_estimation_curves(&cfg).unwrap();
        for method in [Estimator::Lfa, Estimator::Ppca] {
            let small = curves.point(method, 50).unwrap().summary()[2].0;
            let large = curves.point(method, 1000).unwrap().summary()[2].0;
            assert!(large < small, "{method}: {large} >= {small}");
        }
        let lfa_psi = curves.point(Estimator::Lfa, 1000).unwrap().summary()[1].0;
        let ppca_psi = curves.point(Estimator::Ppca, 1000).unwrap().summary()[1].0;
        assert!(lfa_psi < ppca_psi);
        assert!(curves
            .trace
            .iter()
            .any(|t| t.method == Estimator::Lfa && t.iteration > 0));
        assert_eq!(
            curves
                .trace
                .iter()
                .filter(|t| t.method == Estimator::Ppca)
                .count(),
            1
        );
        assert!(curves
            .curves_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("method,n,mad_sig"));
        assert!(curves
            .trace_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("method,iteration"));
    }

    fn mixture(n_per_class: usize, d: usize, seed: u64) -> DataMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..3u32 {
            for _ in 0..n_per_class {
                for j in 0..d {
                    let shift = if j % 3 == class as usize { 6.0 } else { 0.0 };
                    rows.push(shift + rng.sample::<f64, _>(StandardNormal));
                }
                labels.push(class);
            }
        }
        DataMatrix::from_rows(3 * n_per_class, d, &rows, Some(labels)).unwrap()
    }

    #[test]
    fn sweep_separated_mixture() {
        let train = mixture(100, 12, 1);
        let test = mixture(50, 12, 2);
        for method in Estimator::ALL {
            let r = run_classification_sweep(&train, &test, method, &[4, 12], &FitOptions::new(2))
                .unwrap();
            assert!(r.class_errors.is_empty());
            for &(_, acc) in &r.accuracy {
                assert!(acc >= 99.0, "{method}: {acc}");
            }
        }
    }

    #[test]
    fn sweep_reports_small_classes() {
        let mut train = mixture(30, 6, 3);
        let (values, labels) = train.clone().into_parts();
        let mut labels = labels.unwrap();
        labels[0] = 9;
        labels[1] = 9;
        train = DataMatrix::new(values, Some(labels)).unwrap();
        let test = mixture(10, 6, 4);
        let r = run_classification_sweep(&train, &test, Estimator::Ppca, &[6], &FitOptions::new(2))
            .unwrap();
        assert_eq!(r.class_errors.len(), 1);
        assert_eq!(r.class_errors[0].0, 9);
        assert!(run_classification_sweep(
            &train,
            &test,
            Estimator::Ppca,
            &[7],
            &FitOptions::new(2)
        )
        .is_err());
        assert!(run_classification_sweep(
            &train,
            &test.without_labels(),
            Estimator::Ppca,
            &[3],
            &FitOptions::new(2)
        )
        .is_err());
    }

    #[test]
    fn timing_non_negative() {
        let x = DataMatrix::unlabeled(DMatrix::from_fn(40, 8, |i, j| {
            ((i * 7 + j * 3) % 11) as f64
        }))
        .unwrap();
        let report = timing_report("toy", &x, &Estimator::ALL, &FitOptions::new(2), 2).unwrap();
        assert_eq!(report.methods.len(), 4);
        for m in &report.methods {
            assert!(m.seconds.iter().all(|&s| s >= 0.0));
            assert!(m.coefficient_of_variation >= 0.0);
        }
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(v["methods"][0]["method"], "ppca");
    }
}
