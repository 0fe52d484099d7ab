//! Command-line front end. `dispatch` returns the process exit code:
//! 0 on success, 1 for invalid input, 2 for filesystem failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::model::{
    cluster_schedule, gradcheck_suite, Checkpoint, PoolingConfig, DEFAULT_ENTROPY_COEFF, DEFAULT_HIDDEN_DIM,
    DEFAULT_ITERATIONS, DEFAULT_LAYERS, GRADCHECK_TOLERANCE,
};
use crate::train::{evaluate, kfold_cv_jobs, train, OptimizerKind, TrainConfig, DEFAULT_EPOCHS, DEFAULT_FOLDS};
use crate::tu::{dataset_stats, load_tu_dataset, reference_stats};
use crate::tx::{
    build_dataset, parse_targets_csv, parse_tx_csv, read_dataset, synth_tx_corpus, write_dataset, write_targets_csv,
    write_tx_csv, EdgeWeighting, PatternOptions, DEFAULT_K_ORDER, DEFAULT_MAX_NODES, MANIFEST_FILE,
};

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "mcgc", version, about = "Multi-channel pooling graph classifier")]
struct Cli {
    /// Log per-epoch progress.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a pattern-graph dataset from a transaction CSV and a target list.
    Ingest(IngestArgs),
    /// Generate a synthetic transaction corpus and its dataset.
    Synth(SynthArgs),
    /// Train one model on a whole dataset.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Accuracy of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on random graphs.
    Gradcheck(GradcheckArgs),
    /// Dataset statistics next to the published reference values.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
struct PatternArgs {
    /// Breadth-first radius around each target.
    #[arg(long, default_value_t = DEFAULT_K_ORDER)]
    k_order: usize,
    /// binary | log-amount
    #[arg(long, default_value_t = EdgeWeighting::Binary)]
    edge_weights: EdgeWeighting,
    /// Pattern graphs are truncated to this many nodes, farthest first.
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
}

impl PatternArgs {
    fn options(&self) -> Result<PatternOptions> {
        if self.k_order == 0 || self.max_nodes == 0 {
            return Err(Error::Validation("--k-order and --max-nodes must be >= 1".into()));
        }
        Ok(PatternOptions {
            k_order: self.k_order,
            max_nodes: self.max_nodes,
            edge_weights: self.edge_weights,
        })
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// CSV with from_addr,to_addr,amount,timestamp columns.
    #[arg(long)]
    tx: PathBuf,
    /// CSV with address,label columns.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "transactions")]
    name: String,
    #[command(flatten)]
    pattern: PatternArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    phishing: usize,
    #[arg(long, default_value_t = 100)]
    normal: usize,
    #[arg(long, env = "MCGC_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pattern: PatternArgs,
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// Dataset directory: either one written by `ingest`/`synth` or a TU
    /// benchmark folder.
    #[arg(long)]
    data: PathBuf,
    /// TU dataset name (file prefix); defaults to the folder name.
    #[arg(long)]
    tu_name: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = DEFAULT_HIDDEN_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_LAYERS)]
    layers: usize,
    /// Propagation steps per GNN block.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    /// Comma-separated cluster counts, one per pooling layer. Defaults to a
    /// quarter of the previous size, starting from the largest graph.
    #[arg(long, value_delimiter = ',')]
    clusters: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_ENTROPY_COEFF)]
    entropy_coeff: f64,
}

impl ModelArgs {
    fn config(&self, ds: &GraphDataset) -> Result<PoolingConfig> {
        let clusters = self
            .clusters
            .clone()
            .unwrap_or_else(|| cluster_schedule(ds.max_nodes(), self.layers));
        let mut cfg = PoolingConfig::new(self.layers, self.iterations, self.dim, clusters)?;
        cfg.entropy_coeff = self.entropy_coeff;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, env = "MCGC_SEED", default_value_t = 0)]
    seed: u64,
    /// adam | sgd
    #[arg(long, default_value_t = OptimizerKind::Adam)]
    optimizer: OptimizerKind,
    /// Graphs averaged into one update.
    #[arg(long, default_value_t = 1)]
    accumulation: usize,
}

impl OptimArgs {
    fn config(&self, folds: usize) -> Result<TrainConfig> {
        if self.lr <= 0.0 {
            return Err(Error::Validation(format!("--lr must be > 0, got {}", self.lr)));
        }
        let cfg = TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            folds,
            seed: self.seed,
            optimizer: self.optimizer,
            accumulation: self.accumulation,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CvArgs {
    /// Dataset directory (see `train`); not needed with `--replay`.
    #[arg(long, required_unless_present = "replay")]
    data: Option<PathBuf>,
    #[arg(long)]
    tu_name: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Rerun the configuration recorded in an earlier run manifest.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, env = "MCGC_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of random graphs.
    #[arg(long, default_value_t = 20)]
    graphs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Reference entry to compare against; defaults to the dataset name.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Record of one run, enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub tu_name: Option<String>,
    /// SHA-256 over the dataset's graphs.
    pub dataset_fingerprint: Option<String>,
    pub train: Option<TrainConfig>,
    pub model: Option<PoolingConfig>,
    pub pattern: Option<PatternOptions>,
    pub jobs: Option<usize>,
    pub artifacts: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            seed: None,
            dataset: None,
            tu_name: None,
            dataset_fingerprint: None,
            train: None,
            model: None,
            pattern: None,
            jobs: None,
            artifacts: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }
}

/// Content hash over names, labels and the exact bits of every matrix.
pub fn dataset_fingerprint(ds: &GraphDataset) -> String {
    let mut h = Sha256::new();
    h.update(ds.name.as_bytes());
    h.update((ds.num_classes as u64).to_le_bytes());
    h.update((ds.len() as u64).to_le_bytes());
    for g in &ds.graphs {
        h.update((g.label() as u64).to_le_bytes());
        for m in [g.adjacency(), g.features()] {
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// Writes through a sibling temporary file and a rename.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: "<output>".into(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn finish(mut manifest: RunManifest, out: Option<&Path>, start: Instant) -> Result<()> {
    let Some(out) = out else {
        return Ok(());
    };
    create_dir(out)?;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let path = out.join(MANIFEST_NAME);
    write_atomic(&path, &to_json(&manifest)?)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_data(args: &DataArgs) -> Result<GraphDataset> {
    let dir = &args.data;
    if dir.join(MANIFEST_FILE).exists() {
        return read_dataset(dir);
    }
    let name = match &args.tu_name {
        Some(n) => n.clone(),
        None => dir
            .file_name()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Validation(format!("cannot infer a dataset name from {}", dir.display())))?,
    };
    load_tu_dataset(dir, &name)
}

fn run_ingest(a: IngestArgs) -> Result<()> {
    let start = Instant::now();
    let opts = a.pattern.options()?;
    let parsed = parse_tx_csv(&a.tx)?;
    for e in &parsed.row_errors {
        warn!("{}:{}: {}", a.tx.display(), e.line, e.detail);
    }
    info!(
        "{} records kept, {} self-transfers and {} malformed rows dropped",
        parsed.records.len(),
        parsed.self_transfers,
        parsed.row_errors.len()
    );
    let targets = parse_targets_csv(&a.targets)?;
    let ds = build_dataset(&a.name, &parsed.records, &targets, &opts)?;
    write_dataset(&a.out, &ds)?;
    println!("{} graphs written to {}", ds.len(), a.out.display());
    let mut m = RunManifest::new("ingest");
    m.dataset = Some(a.out.clone());
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    m.pattern = Some(opts);
    m.artifacts = vec![a.out.join(MANIFEST_FILE)];
    finish(m, Some(&a.out), start)
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let start = Instant::now();
    let opts = a.pattern.options()?;
    let corpus = synth_tx_corpus(a.seed, a.phishing, a.normal)?;
    create_dir(&a.out)?;
    let tx_path = a.out.join("transactions.csv");
    let targets_path = a.out.join("targets.csv");
    write_tx_csv(&tx_path, &corpus.records)?;
    write_targets_csv(&targets_path, &corpus.targets)?;
    let ds_dir = a.out.join("dataset");
    let ds = build_dataset("synthetic", &corpus.records, &corpus.targets, &opts)?;
    write_dataset(&ds_dir, &ds)?;
    println!(
        "{} records, {} targets, dataset in {}",
        corpus.records.len(),
        corpus.targets.len(),
        ds_dir.display()
    );
    let mut m = RunManifest::new("synth");
    m.seed = Some(a.seed);
    m.dataset = Some(ds_dir.clone());
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    m.pattern = Some(opts);
    m.artifacts = vec![tx_path, targets_path, ds_dir];
    finish(m, Some(&a.out), start)
}

fn run_train(a: TrainArgs) -> Result<()> {
    let start = Instant::now();
    let ds = load_data(&a.data)?;
    let pcfg = a.model.config(&ds)?;
    let cfg = a.optim.config(DEFAULT_FOLDS)?;
    let (params, metrics) = train(&ds, &cfg, &pcfg)?;
    create_dir(&a.out)?;
    let ck = a.out.join("checkpoint.json");
    Checkpoint::new(pcfg.clone(), &params).save(&ck)?;
    let artifacts = write_metrics(&a.out, &metrics)?;
    print!("{}", metrics.table());
    let mut m = RunManifest::new("train");
    m.seed = Some(cfg.seed);
    m.dataset = Some(a.data.data.clone());
    m.tu_name = a.data.tu_name.clone();
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    m.train = Some(cfg);
    m.model = Some(pcfg);
    m.artifacts = std::iter::once(ck).chain(artifacts).collect();
    finish(m, Some(&a.out), start)
}

fn write_metrics(out: &Path, metrics: &crate::train::Metrics) -> Result<Vec<PathBuf>> {
    let json = out.join("metrics.json");
    let table = out.join("metrics.txt");
    let curves = out.join("curves.csv");
    let timing = out.join("timing.json");
    write_atomic(&json, &metrics.to_json()?)?;
    write_atomic(&table, &metrics.table())?;
    metrics.write_curves_csv(&curves)?;
    write_atomic(&timing, &metrics.timing_json())?;
    Ok(vec![json, table, curves, timing])
}

fn run_cv(a: CvArgs) -> Result<()> {
    let start = Instant::now();
    let (data, cfg, pcfg, ds, jobs) = match &a.replay {
        Some(path) => {
            let old = RunManifest::load(path)?;
            if old.command != "cv" {
                return Err(Error::Validation(format!(
                    "{} records a `{}` run, not `cv`",
                    path.display(),
                    old.command
                )));
            }
            let missing = |what: &str| Error::Validation(format!("{} lacks {what}", path.display()));
            let data = DataArgs {
                data: old.dataset.clone().ok_or_else(|| missing("a dataset"))?,
                tu_name: old.tu_name.clone(),
            };
            let ds = load_data(&data)?;
            let fp = dataset_fingerprint(&ds);
            if old.dataset_fingerprint.as_deref() != Some(fp.as_str()) {
                return Err(Error::Validation(format!(
                    "dataset {} changed since the recorded run",
                    data.data.display()
                )));
            }
            let cfg = old.train.ok_or_else(|| missing("a training config"))?;
            let pcfg = old.model.ok_or_else(|| missing("a model config"))?;
            (data, cfg, pcfg, ds, old.jobs.unwrap_or(a.jobs))
        }
        None => {
            let data = DataArgs {
                data: a.data.clone().unwrap_or_default(),
                tu_name: a.tu_name.clone(),
            };
            let ds = load_data(&data)?;
            let pcfg = a.model.config(&ds)?;
            let cfg = a.optim.config(a.folds)?;
            (data, cfg, pcfg, ds, a.jobs)
        }
    };
    if jobs == 0 {
        return Err(Error::Validation("--jobs must be >= 1".into()));
    }
    let metrics = kfold_cv_jobs(&ds, &cfg, &pcfg, jobs)?;
    create_dir(&a.out)?;
    let artifacts = write_metrics(&a.out, &metrics)?;
    print!("{}", metrics.table());
    let mut m = RunManifest::new("cv");
    m.seed = Some(cfg.seed);
    m.dataset = Some(data.data.clone());
    m.tu_name = data.tu_name.clone();
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    m.train = Some(cfg);
    m.model = Some(pcfg);
    m.jobs = Some(jobs);
    m.artifacts = artifacts;
    finish(m, Some(&a.out), start)
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let ck = Checkpoint::load(&a.checkpoint)?;
    let params = ck.model()?;
    let ds = load_data(&a.data)?;
    let acc = evaluate(&ds.graphs, &params, &ck.config)?;
    println!("accuracy {acc:.6} on {} graphs", ds.len());
    let mut m = RunManifest::new("eval");
    m.dataset = Some(a.data.data.clone());
    m.tu_name = a.data.tu_name.clone();
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    m.model = Some(ck.config.clone());
    m.artifacts = vec![a.checkpoint.clone()];
    finish(m, a.out.as_deref(), start)
}

/// Returns whether the check passed.
fn run_gradcheck(a: GradcheckArgs) -> Result<bool> {
    let start = Instant::now();
    let report = gradcheck_suite(a.seed, a.graphs)?;
    for (i, c) in report.cases.iter().enumerate() {
        println!(
            "graph {i:>3}  nodes {:>3}  max rel error {:.3e}  ({})",
            c.nodes, c.max_rel_error, c.worst_param
        );
    }
    println!(
        "max relative error {:.3e} (tolerance {GRADCHECK_TOLERANCE:.0e}): {}",
        report.max_rel_error,
        if report.passed { "PASS" } else { "FAIL" }
    );
    let mut m = RunManifest::new("gradcheck");
    m.seed = Some(a.seed);
    if let Some(out) = &a.out {
        create_dir(out)?;
        let path = out.join("gradcheck.json");
        write_atomic(&path, &to_json(&report)?)?;
        m.artifacts = vec![path];
    }
    finish(m, a.out.as_deref(), start)?;
    Ok(report.passed)
}

fn run_stats(a: StatsArgs) -> Result<()> {
    let start = Instant::now();
    let ds = load_data(&a.data)?;
    let stats = dataset_stats(&ds)?;
    let reference = reference_stats(a.reference.as_deref().unwrap_or(&ds.name));
    println!("{:<12} {:>12} {:>12}", "", "measured", "reference");
    let row = |label: &str, got: String, want: Option<String>| {
        println!("{label:<12} {got:>12} {:>12}", want.unwrap_or_else(|| "-".into()));
    };
    row(
        "graphs",
        stats.graphs.to_string(),
        reference.map(|r| r.graphs.to_string()),
    );
    row(
        "classes",
        stats.classes.to_string(),
        reference.map(|r| r.classes.to_string()),
    );
    row(
        "mean nodes",
        format!("{:.2}", stats.mean_nodes),
        reference.map(|r| format!("{:.2}", r.mean_nodes)),
    );
    row(
        "mean edges",
        format!("{:.2}", stats.mean_edges),
        reference.map(|r| format!("{:.2}", r.mean_edges)),
    );
    let mut m = RunManifest::new("stats");
    m.dataset = Some(a.data.data.clone());
    m.tu_name = a.data.tu_name.clone();
    m.dataset_fingerprint = Some(dataset_fingerprint(&ds));
    finish(m, a.out.as_deref(), start)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        2
    } else {
        1
    }
}

/// Parses `argv` (program name first) and runs the chosen subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    let result = match cli.command {
        Command::Ingest(a) => run_ingest(a),
        Command::Synth(a) => run_synth(a),
        Command::Train(a) => run_train(a),
        Command::Cv(a) => run_cv(a),
        Command::Eval(a) => run_eval(a),
        Command::Gradcheck(a) => match run_gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => return 1,
            Err(e) => Err(e),
        },
        Command::Stats(a) => run_stats(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
