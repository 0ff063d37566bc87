//! Command-line front end: `synth | optimize | greedy | analyze | eval`.
//!
//! Commands that write several artifacts take an output prefix `P` and write
//! `P.<artifact>` files next to a `P.manifest.json` that records the resolved
//! configuration, inputs, outputs and (unless `--no-timings`) stage timings.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{self, load_csv, metrics, standardize, train_test_split, Dataset, Standardization, SynthFunction};
use crate::error::{Error, Result};
use crate::greedy::{fit_greedy, write_decay_csv, Criterion, GreedyConfig, GreedyModel};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::layer::{principal_angles, spectral_report, FirstLayer};
use crate::optim::{optimize_first_layer, LayerInit, OptimConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "twolayer", version, about = "Two-layered kernel optimization and greedy kernel approximation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a test function on the unit cube and write it as CSV.
    Synth(SynthArgs),
    /// Optimize the first-layer matrix on a dataset.
    Optimize(OptimizeArgs),
    /// Fit a greedy kernel model, with a learned layer or over an eps grid.
    Greedy(GreedyArgs),
    /// Spectral report and principal angles of first-layer matrices.
    Analyze(AnalyzeArgs),
    /// Evaluate a saved greedy model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Test function: f5 | f6 | f7.
    #[arg(long = "func")]
    pub func: String,
    /// Number of points.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    /// Base kernel: matern0 | matern1 | matern2 | gaussian [default: matern0].
    #[arg(long)]
    pub kernel: Option<String>,
    /// Length scale multiplying distances [default: 1].
    #[arg(long)]
    pub length_scale: Option<f64>,
    /// Divide the length scale by sqrt(d).
    #[arg(long)]
    pub sqrt_d_scaling: bool,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Training CSV (header row, last column is the target).
    #[arg(long)]
    pub data: PathBuf,
    /// Separate test CSV.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Split `--data` into train/test with this training fraction.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Z-score features and target with training statistics.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Adam learning rate [default: 5e-3].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum number of epochs [default: 25].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Cross-validation folds per batch [default: batch size].
    #[arg(long)]
    pub k_folds: Option<usize>,
    /// Tikhonov regularization of the batch Gram matrix [default: 1e-5].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Epochs without relative improvement before stopping [default: 3].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Output dimension b of the layer [default: input dimension].
    #[arg(long)]
    pub rows: Option<usize>,
    /// identity | scaled:<c> | <layer.json> [default: identity].
    #[arg(long)]
    pub init: Option<String>,
    /// Write the layer of the lowest-loss epoch instead of the final iterate.
    #[arg(long)]
    pub restore_best: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args)]
pub struct GreedyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First-layer JSON; without it and without --eps-grid the plain kernel is used.
    #[arg(long, conflicts_with = "eps_grid")]
    pub layer: Option<PathBuf>,
    /// `lo,hi,count`: log-spaced length-scale multipliers, endpoints included.
    #[arg(long)]
    pub eps_grid: Option<String>,
    /// p | f | fp [default: f].
    #[arg(long)]
    pub criterion: Option<String>,
    /// [default: 100]
    #[arg(long)]
    pub max_centers: Option<usize>,
    /// Stop when the selection indicator falls to this value [default: 0].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Relative power floor for candidate eligibility [default: 1e-13].
    #[arg(long)]
    pub stability_floor: Option<f64>,
    /// Diagonal regularization of the training Gram matrix [default: 0].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed of the train/test split [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Layer JSON files; give two or more for principal angles.
    #[arg(long = "layer", required = true)]
    pub layers: Vec<PathBuf>,
    /// Largest subspace dimension for principal angles [default: min rows].
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Standardization JSON written by `greedy --standardize`.
    #[arg(long)]
    pub standardization: Option<PathBuf>,
    /// Predictions CSV (`y_true,y_pred`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance record written next to every run's artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunManifest {
    fn new(subcommand: &str, seed: Option<u64>, timings: bool) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: timings.then(BTreeMap::new),
        }
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    fn time(&mut self, stage: &str, started: Instant) {
        if let Some(t) = &mut self.timings {
            t.insert(stage.into(), started.elapsed().as_secs_f64());
        }
    }

    fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Flat `key=value` configuration; `#` starts a comment, `-` and `_` are
/// interchangeable in keys.
#[derive(Debug, Default)]
pub struct ConfigFile(HashMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: i + 1,
                column: 1,
                message: format!("expected key=value, got '{line}'"),
            })?;
            map.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(ConfigFile(map))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    /// Flag value, else file value, else `None`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::domain(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.resolve::<bool>(None, key)?.unwrap_or(false))
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn resolve_kernel(args: &KernelArgs, cfg: &ConfigFile, d: usize, manifest: &mut RunManifest) -> Result<KernelSpec> {
    let family: KernelFamily = cfg
        .resolve(args.kernel.clone(), "kernel")?
        .unwrap_or_else(|| "matern0".to_string())
        .parse()?;
    let base = cfg.resolve(args.length_scale, "length_scale")?.unwrap_or(1.0);
    let sqrt_d = cfg.flag(args.sqrt_d_scaling, "sqrt_d_scaling")?;
    let eps = if sqrt_d { base / (d as f64).sqrt() } else { base };
    manifest.set("kernel", family);
    manifest.set("length_scale", base);
    manifest.set("sqrt_d_scaling", sqrt_d);
    manifest.set("effective_length_scale", eps);
    KernelSpec::new(family, eps)
}

/// Train data plus optional test data, split and standardized as requested.
struct Prepared {
    train_x: DMatrix<f64>,
    train_y: DVector<f64>,
    test: Option<(DMatrix<f64>, DVector<f64>)>,
    standardization: Option<Standardization>,
}

fn prepare_data(args: &DataArgs, cfg: &ConfigFile, seed: u64, manifest: &mut RunManifest) -> Result<Prepared> {
    let mut ds = load_csv(&args.data)?;
    manifest.inputs.push(args.data.display().to_string());
    manifest.set("rejected_rows", ds.rejected_rows);
    if let Some(frac) = cfg.resolve(args.train_fraction, "train_fraction")? {
        if args.test.is_some() {
            return Err(Error::domain("--train-fraction and --test are mutually exclusive"));
        }
        ds = train_test_split(&ds, frac, seed)?;
        manifest.set("train_fraction", frac);
    }
    if let Some(test_path) = &args.test {
        let test = load_csv(test_path)?;
        manifest.inputs.push(test_path.display().to_string());
        if test.dim() != ds.dim() {
            return Err(Error::domain("train and test files differ in feature count"));
        }
        let mut split = ds.split.clone();
        split.extend(std::iter::repeat_n(data::Split::Test, test.len()));
        let x = DMatrix::from_fn(ds.len() + test.len(), ds.dim(), |i, j| {
            if i < ds.len() { ds.x[(i, j)] } else { test.x[(i - ds.len(), j)] }
        });
        let y = DVector::from_fn(ds.len() + test.len(), |i, _| if i < ds.len() { ds.y[i] } else { test.y[i - ds.len()] });
        ds = Dataset { x, y, split, ..ds };
    }
    let standardize_flag = cfg.flag(args.standardize, "standardize")?;
    manifest.set("standardize", standardize_flag);
    if standardize_flag {
        ds = standardize(&ds)?;
    }
    let (train_x, train_y) = ds.train();
    let (test_x, test_y) = ds.test();
    Ok(Prepared {
        train_x,
        train_y,
        test: (!test_y.is_empty()).then_some((test_x, test_y)),
        standardization: ds.standardization,
    })
}

fn parse_init(raw: &str) -> Result<LayerInit> {
    match raw {
        "identity" => Ok(LayerInit::Identity),
        s if s.starts_with("scaled:") => {
            let c: f64 = s["scaled:".len()..]
                .parse()
                .map_err(|_| Error::domain(format!("bad scaled init '{s}'")))?;
            Ok(LayerInit::ScaledIdentity(c))
        }
        path => Ok(LayerInit::Loaded(FirstLayer::load(path)?)),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let func: SynthFunction = a.func.parse()?;
    let ds = data::synth_dataset(func, a.n, a.seed);
    data::save_csv(&ds, &a.out)?;
    let mut m = RunManifest::new("synth", Some(a.seed), !a.no_timings);
    m.set("func", func);
    m.set("n", a.n);
    m.output(&a.out);
    m.time("total", started);
    m.write(&a.out.with_extension("manifest.json"))
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let seed = cfg.resolve(a.seed, "seed")?.unwrap_or(0);
    let mut m = RunManifest::new("optimize", Some(seed), !a.no_timings);
    if let Some(p) = &a.config {
        m.inputs.push(p.display().to_string());
    }
    let data = prepare_data(&a.data, &cfg, seed, &mut m)?;
    let spec = resolve_kernel(&a.kernel, &cfg, data.train_x.ncols(), &mut m)?;
    let defaults = OptimConfig::default();
    let init_raw = cfg.resolve(a.init.clone(), "init")?.unwrap_or_else(|| "identity".into());
    let config = OptimConfig {
        learning_rate: cfg.resolve(a.learning_rate, "learning_rate")?.unwrap_or(defaults.learning_rate),
        batch_size: cfg.resolve(a.batch_size, "batch_size")?.unwrap_or(defaults.batch_size),
        max_epochs: cfg.resolve(a.epochs, "epochs")?.unwrap_or(defaults.max_epochs),
        k_folds: cfg.resolve(a.k_folds, "k_folds")?,
        lambda: cfg.resolve(a.lambda, "lambda")?.unwrap_or(defaults.lambda),
        patience: cfg.resolve(a.patience, "patience")?.unwrap_or(defaults.patience),
        rows: cfg.resolve(a.rows, "rows")?,
        init: parse_init(&init_raw)?,
        restore_best: cfg.flag(a.restore_best, "restore_best")?,
        seed,
        ..defaults
    };
    for (k, v) in [
        ("learning_rate", config.learning_rate.to_string()),
        ("batch_size", config.batch_size.to_string()),
        ("epochs", config.max_epochs.to_string()),
        ("k_folds", config.folds().to_string()),
        ("lambda", config.lambda.to_string()),
        ("patience", config.patience.to_string()),
        ("min_rel_improvement", config.min_rel_improvement.to_string()),
        ("adam_beta1", config.adam_beta1.to_string()),
        ("adam_beta2", config.adam_beta2.to_string()),
        ("adam_eps", config.adam_eps.to_string()),
        ("rows", config.rows.unwrap_or(data.train_x.ncols()).to_string()),
        ("init", init_raw.clone()),
        ("restore_best", config.restore_best.to_string()),
    ] {
        m.set(k, v);
    }
    m.time("load", started);
    let t_opt = Instant::now();
    let (layer, trace) = optimize_first_layer(&spec, &data.train_x, &data.train_y, &config)?;
    m.time("optimize", t_opt);
    m.set("stop_reason", format!("{:?}", trace.stop_reason));
    m.set("best_epoch", trace.best_epoch.map(|e| (e + 1).to_string()).unwrap_or_default());

    let layer_path = with_suffix(&a.out, ".layer.json");
    let trace_path = with_suffix(&a.out, ".trace.csv");
    layer.save(&layer_path)?;
    trace.write_csv(File::create(&trace_path)?, !a.no_timings)?;
    m.output(&layer_path);
    m.output(&trace_path);
    if let Some(st) = &data.standardization {
        let p = with_suffix(&a.out, ".standardization.json");
        fs::write(&p, serde_json::to_string_pretty(st)?)?;
        m.output(&p);
    }
    m.time("total", started);
    m.write(&with_suffix(&a.out, ".manifest.json"))
}

/// `count` log-spaced values from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::domain("eps grid needs positive finite bounds and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::domain(format!("--eps-grid expects lo,hi,count, got '{raw}'")));
    }
    let bad = || Error::domain(format!("cannot parse eps grid '{raw}'"));
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    log_grid(lo, hi, count)
}

fn cmd_greedy(a: &GreedyArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let seed = cfg.resolve(a.seed, "seed")?.unwrap_or(0);
    let mut m = RunManifest::new("greedy", Some(seed), !a.no_timings);
    let data = prepare_data(&a.data, &cfg, seed, &mut m)?;
    let spec = resolve_kernel(&a.kernel, &cfg, data.train_x.ncols(), &mut m)?;
    let defaults = GreedyConfig::default();
    let config = GreedyConfig {
        criterion: cfg
            .resolve(a.criterion.clone(), "criterion")?
            .map(|c| c.parse::<Criterion>())
            .transpose()?
            .unwrap_or(defaults.criterion),
        max_centers: cfg.resolve(a.max_centers, "max_centers")?.unwrap_or(defaults.max_centers),
        residual_tolerance: cfg.resolve(a.tolerance, "tolerance")?.unwrap_or(defaults.residual_tolerance),
        power_stability_floor: cfg
            .resolve(a.stability_floor, "stability_floor")?
            .unwrap_or(defaults.power_stability_floor),
        lambda: cfg.resolve(a.lambda, "lambda")?.unwrap_or(defaults.lambda),
    };
    m.set("criterion", config.criterion);
    m.set("max_centers", config.max_centers);
    m.set("tolerance", config.residual_tolerance);
    m.set("stability_floor", config.power_stability_floor);
    m.set("lambda", config.lambda);

    let grid = cfg.resolve(a.eps_grid.clone(), "eps_grid")?;
    let layer = match (&a.layer, &grid) {
        (Some(_), Some(_)) => return Err(Error::domain("--layer and --eps-grid are mutually exclusive")),
        (Some(p), None) => {
            m.inputs.push(p.display().to_string());
            Some(FirstLayer::load(p)?)
        }
        _ => None,
    };
    m.time("load", started);

    let run = |spec: &KernelSpec, tag: &str, m: &mut RunManifest| -> Result<()> {
        let t = Instant::now();
        let model = fit_greedy(spec, layer.as_ref(), &data.train_x, &data.train_y, &config)?;
        m.time(&format!("greedy{tag}"), t);
        let model_path = with_suffix(&a.out, &format!("{tag}.model.json"));
        let trace_path = with_suffix(&a.out, &format!("{tag}.trace.csv"));
        model.save(&model_path)?;
        model.write_trace_csv(File::create(&trace_path)?)?;
        m.output(&model_path);
        m.output(&trace_path);
        if let Some((tx, ty)) = &data.test {
            let decay = model.error_decay(tx, ty)?;
            let decay_path = with_suffix(&a.out, &format!("{tag}.decay.csv"));
            write_decay_csv(&decay, File::create(&decay_path)?)?;
            m.output(&decay_path);
        }
        Ok(())
    };

    match grid {
        Some(raw) => {
            let eps = parse_grid(&raw)?;
            m.set("eps_grid", eps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","));
            for (i, e) in eps.iter().enumerate() {
                let s = spec.with_length_scale(spec.length_scale() * e)?;
                run(&s, &format!(".eps{i:02}"), &mut m)?;
            }
        }
        None => run(&spec, "", &mut m)?,
    }
    if let Some(st) = &data.standardization {
        let p = with_suffix(&a.out, ".standardization.json");
        fs::write(&p, serde_json::to_string_pretty(st)?)?;
        m.output(&p);
    }
    m.time("total", started);
    m.write(&with_suffix(&a.out, ".manifest.json"))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze", None, !a.no_timings);
    let layers = a
        .layers
        .iter()
        .map(|p| {
            m.inputs.push(p.display().to_string());
            FirstLayer::load(p)
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, layer) in layers.iter().enumerate() {
        let rep = spectral_report(layer)?;
        let csv_path = with_suffix(&a.out, &format!(".{i}.spectral.csv"));
        let json_path = with_suffix(&a.out, &format!(".{i}.spectral.json"));
        rep.write_csv(File::create(&csv_path)?)?;
        fs::write(&json_path, rep.to_json()? + "\n")?;
        m.output(&csv_path);
        m.output(&json_path);
    }
    if layers.len() >= 2 {
        let max_n = layers.iter().map(FirstLayer::rows).min().unwrap_or(1);
        let n = a.n.unwrap_or(max_n);
        m.set("n", n);
        let path = with_suffix(&a.out, ".angles.csv");
        let mut w = csv::Writer::from_writer(File::create(&path)?);
        w.write_record(["layer_a", "layer_b", "n", "max_angle_deg"])?;
        for i in 0..layers.len() {
            for j in i + 1..layers.len() {
                for k in 1..=n {
                    let angles = principal_angles(&layers[i], &layers[j], k)?;
                    let max = angles.last().copied().unwrap_or(0.0);
                    w.write_record([i.to_string(), j.to_string(), k.to_string(), format!("{max:e}")])?;
                }
            }
        }
        w.flush()?;
        m.output(&path);
    }
    m.time("total", started);
    m.write(&with_suffix(&a.out, ".manifest.json"))
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = GreedyModel::load(&a.model)?;
    let mut ds = load_csv(&a.data)?;
    if let Some(p) = &a.standardization {
        let st: Standardization = serde_json::from_str(&fs::read_to_string(p)?)?;
        ds.x = st.apply_features(&ds.x)?;
        ds.y = ds.y.map(|v| (v - st.target_mean) / st.target_scale);
    }
    let pred = model.predict(&ds.x)?;
    let met = metrics(ds.y.as_slice(), pred.as_slice())?;
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_writer(File::create(out)?);
        w.write_record(["y_true", "y_pred"])?;
        for (t, p) in ds.y.iter().zip(pred.iter()) {
            w.write_record([t.to_string(), p.to_string()])?;
        }
        w.flush()?;
    }
    println!("{}", serde_json::to_string(&met)?);
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Greedy(a) => cmd_greedy(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) => EXIT_USAGE,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } => EXIT_IO,
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
