//! `snrsel` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::classifier::{
    read_bank, read_manifest, write_bank, write_predictions, ClassModel, ClassifierBank,
};
use crate::data::{center, partition_by_class, DataMatrix};
use crate::error::{Error, Result};
use crate::estimators::{fit, read_model, write_model, Estimator, FitOptions};
use crate::experiments::{
    run_classification_sweep, run_estimation_curves, run_recovery_grid, sweep_csv, timing_report,
    EstimationConfig, FitSettings, RecoveryGridConfig,
};
use crate::io::{read_matrix, write_matrix, CsvOptions, MatrixFormat};
use crate::simulation::{generate, write_truth, SimSpec};
use crate::snr::{compute_snr, select_top_m};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "snrsel",
    version,
    about = "SNR feature selection on low-rank generative models"
)]
pub struct Cli {
    /// Worker threads; falls back to SNRSEL_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic data with ten known signal features.
    Simulate(SimulateArgs),
    /// Fit a low-rank model, or one per class.
    Fit(FitArgs),
    /// Rank features of a fitted model by SNR and keep the top m.
    Select(SelectArgs),
    /// Classify observations with a per-class model bank.
    Predict(PredictArgs),
    /// Run a simulation study or a classification sweep.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ppca,
    Lfa,
    Elf,
    Heteropca,
}

impl From<Method> for Estimator {
    fn from(m: Method) -> Self {
        match m {
            Method::Ppca => Estimator::Ppca,
            Method::Lfa => Estimator::Lfa,
            Method::Elf => Estimator::Elf,
            Method::Heteropca => Estimator::HeteroPca,
        }
    }
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    /// CSV input starts with a header row.
    #[arg(long)]
    pub header: bool,
    /// Last CSV column holds integer class labels.
    #[arg(long)]
    pub labels: bool,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            has_header: self.header,
            label_column: self.labels,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d_noise: usize,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for data.snrf (or data.csv) and truth.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Write data.csv instead of data.snrf.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub rank: usize,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model file, or bank directory with --per-class.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit one model per class label and write a classifier bank.
    #[arg(long)]
    pub per_class: bool,
    /// Features kept per class in the bank; all by default.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Add one score column per class.
    #[arg(long)]
    pub scores: bool,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Feature recovery accuracy over n and noise levels.
    RecoveryGrid(GridArgs),
    /// Parameter estimation error versus n, plus an iteration trace.
    EstimationCurves(CurvesArgs),
    /// Per-class selection and classification accuracy at several m.
    Sweep(SweepArgs),
}

/// Options shared by the experiment subcommands. Each flag overrides the key
/// of the same name (with `_` for `-`) in the JSON config.
#[derive(Debug, Args)]
pub struct CommonExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonExperimentArgs,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub noise_values: Option<Vec<usize>>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub common: CommonExperimentArgs,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long)]
    pub d_noise: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub trace_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonExperimentArgs,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<usize>>,
    /// Also time each method on the training data and write timings.json.
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub timing_repeats: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub methods: Vec<Estimator>,
    pub m_values: Vec<usize>,
    pub seed: u64,
    pub timings: bool,
    pub timing_repeats: usize,
    #[serde(flatten)]
    pub fit: FitSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            methods: vec![Estimator::Elf, Estimator::Lfa],
            m_values: Vec::new(),
            seed: 0,
            timings: false,
            timing_repeats: 3,
            fit: FitSettings::default(),
        }
    }
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(Error::Io(e))
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    let value = match flag {
        Some(t) => Some(t),
        None => match std::env::var("SNRSEL_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse()
                    .map_err(|_| format!("SNRSEL_THREADS={s:?} is not a thread count"))?,
            ),
            _ => None,
        },
    };
    if value == Some(0) {
        return Err("thread count must be at least 1".into());
    }
    Ok(value)
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Select(a) => select(a),
        Command::Predict(a) => predict(a),
        Command::Experiment(ExperimentCommand::RecoveryGrid(a)) => recovery_grid(a),
        Command::Experiment(ExperimentCommand::EstimationCurves(a)) => estimation_curves(a),
        Command::Experiment(ExperimentCommand::Sweep(a)) => sweep(a),
    }
}

fn load(path: &Path, csv: CsvOptions) -> Result<DataMatrix<f64>> {
    read_matrix(path, MatrixFormat::from_path(path, csv))
}

fn simulate(a: SimulateArgs) -> CliResult {
    let spec = SimSpec::new(a.n, a.d_noise, a.seed).with_rank(a.rank);
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (x, truth) = generate(&spec)?;
    fs::create_dir_all(&a.out)?;
    if a.csv {
        write_matrix(
            &x,
            a.out.join("data.csv"),
            MatrixFormat::Csv(CsvOptions::default()),
        )?;
    } else {
        write_matrix(&x, a.out.join("data.snrf"), MatrixFormat::Snrf)?;
    }
    write_truth(&spec, &truth, a.out.join("truth.json"))?;
    Ok(())
}

fn fit_cmd(a: FitArgs) -> CliResult {
    let mut opts = FitOptions::new(a.rank).with_seed(a.seed);
    if let Some(t) = a.tol {
        opts = opts.with_tol(t);
    }
    if let Some(m) = a.max_iters {
        opts = opts.with_max_iters(m);
    }
    let method = Estimator::from(a.method);
    let data = load(&a.input, a.csv.options())?;
    if !a.per_class {
        if a.m.is_some() {
            return Err(Failure::Usage("--m requires --per-class".into()));
        }
        let model = fit(method, &center(&data)?, &opts)?;
        write_model(&model, &a.out)?;
        return Ok(());
    }
    if data.labels().is_none() {
        return Err(Failure::Usage("--per-class needs labeled input".into()));
    }
    let m = a.m.unwrap_or(data.d());
    let classes: Vec<(u32, DataMatrix<f64>)> = partition_by_class(&data)?.into_iter().collect();
    let models = classes
        .par_iter()
        .map(|(id, x)| {
            let model = fit(method, &center(x)?, &opts)?;
            let ranking = select_top_m(&compute_snr(&model), m)?;
            ClassModel::build(*id, model, ranking)
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = ClassifierBank::from_classes(models)?;
    write_bank(&bank, &a.out, Some(a.seed))?;
    Ok(())
}

fn select(a: SelectArgs) -> CliResult {
    let model = read_model::<f64>(&a.model)?;
    let ranking = select_top_m(&compute_snr(&model), a.m)?;
    let mut out = BufWriter::new(fs::File::create(&a.out)?);
    out.write_all(header_line(None).as_bytes())?;
    ranking.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let bank = read_bank::<f64>(&a.bank)?;
    let seed = read_manifest(&a.bank)?.seed;
    let data = load(&a.input, a.csv.options())?;
    let x = data.values();
    let predictions = (0..data.n())
        .into_par_iter()
        .map(|i| bank.predict(&x.row(i).transpose()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = BufWriter::new(fs::File::create(&a.out)?);
    out.write_all(header_line(seed).as_bytes())?;
    write_predictions(&predictions, a.scores, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads the JSON config (if any), overlays flag values and deserializes the
/// result over the type's defaults. Config keys are the flag names in
/// snake_case; `overrides` lists every accepted key.
fn merge_config<C: DeserializeOwned>(
    path: Option<&Path>,
    overrides: Vec<(&str, Option<Value>)>,
) -> std::result::Result<C, Failure> {
    let mut map = match path {
        Some(p) => {
            let text = fs::read(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            match serde_json::from_slice::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Failure::Usage("config must be a JSON object".into())),
                Err(e) => return Err(Failure::Usage(format!("invalid config JSON: {e}"))),
            }
        }
        None => Map::new(),
    };
    if let Some(unknown) = map
        .keys()
        .find(|k| !overrides.iter().any(|(name, _)| name == k))
    {
        return Err(Failure::Usage(format!("unknown config key {unknown:?}")));
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    }
    serde_json::from_value(Value::Object(map))
        .map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

fn json<T: serde::Serialize>(v: &Option<T>) -> Option<Value> {
    v.as_ref()
        .map(|x| serde_json::to_value(x).expect("plain values serialize"))
}

fn common_overrides(c: &CommonExperimentArgs) -> Vec<(&'static str, Option<Value>)> {
    let methods: Option<Vec<Estimator>> = c
        .methods
        .as_ref()
        .map(|v| v.iter().map(|&m| m.into()).collect());
    vec![
        ("seed", json(&c.seed)),
        ("rank", json(&c.rank)),
        ("tol", json(&c.tol)),
        ("max_iters", json(&c.max_iters)),
        ("methods", json(&methods)),
    ]
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn recovery_grid(a: GridArgs) -> CliResult {
    let mut overrides = common_overrides(&a.common);
    overrides.extend([
        ("n_values", json(&a.n_values)),
        ("noise_values", json(&a.noise_values)),
        ("runs", json(&a.runs)),
    ]);
    let cfg: RecoveryGridConfig = merge_config(a.common.config.as_deref(), overrides)?;
    let grid = run_recovery_grid(&cfg)?;
    write_out(&a.common.out, "recovery_grid.csv", &grid.to_csv())?;
    Ok(())
}

fn estimation_curves(a: CurvesArgs) -> CliResult {
    let mut overrides = common_overrides(&a.common);
    overrides.extend([
        ("n_values", json(&a.n_values)),
        ("d_noise", json(&a.d_noise)),
        ("runs", json(&a.runs)),
        ("trace_n", json(&a.trace_n)),
    ]);
    let cfg: EstimationConfig = merge_config(a.common.config.as_deref(), overrides)?;
    let curves = run_estimation_curves(&cfg)?;
    write_out(&a.common.out, "estimation_curves.csv", &curves.curves_csv())?;
    write_out(&a.common.out, "iteration_trace.csv", &curves.trace_csv())?;
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult {
    let mut overrides = common_overrides(&a.common);
    overrides.extend([
        ("train", json(&a.train)),
        ("test", json(&a.test)),
        ("m_values", json(&a.m_values)),
        ("timings", a.timings.then_some(Value::Bool(true))),
        ("timing_repeats", json(&a.timing_repeats)),
    ]);
    let cfg: SweepConfig = merge_config(a.common.config.as_deref(), overrides)?;
    let (Some(train_path), Some(test_path)) = (&cfg.train, &cfg.test) else {
        return Err(Failure::Usage("sweep needs train and test data".into()));
    };
    let csv = CsvOptions {
        has_header: false,
        label_column: true,
    };
    let train = load(train_path, csv)?;
    let test = load(test_path, csv)?;
    let m_values = if cfg.m_values.is_empty() {
        vec![train.d()]
    } else {
        cfg.m_values.clone()
    };
    let opts = cfg.fit.options(cfg.seed);
    let results = cfg
        .methods
        .iter()
        .map(|&method| run_classification_sweep(&train, &test, method, &m_values, &opts))
        .collect::<Result<Vec<_>>>()?;
    for r in &results {
        for (id, msg) in &r.class_errors {
            eprintln!("warning: {} class {id}: {msg}", r.method);
        }
    }
    write_out(
        &a.common.out,
        "sweep_accuracy.csv",
        &sweep_csv(&results, cfg.seed),
    )?;
    if cfg.timings {
        let name = train_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("train");
        let report = timing_report(name, &train, &cfg.methods, &opts, cfg.timing_repeats)?;
        write_out(&a.common.out, "timings.json", &report.to_json()?)?;
    }
    Ok(())
}

/// Comment line with the tool version (and seed, when one applies) that
/// starts every CSV written by `select` and `predict`.
fn header_line(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# snrsel {} seed={s}\n", env!("CARGO_PKG_VERSION")),
        None => format!("# snrsel {}\n", env!("CARGO_PKG_VERSION")),
    }
}
