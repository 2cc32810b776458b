//! Command-line pipeline: ingest, train-prior, difficulty, finetune, evaluate.
//!
//! Every subcommand accepts `--config FILE` (a JSON object keyed by long flag
//! names, or a manifest written by an earlier run). Flags given on the
//! command line override the file, which overrides built-in defaults. Each
//! run writes `manifest.json` with the fully resolved configuration.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::curriculum::{
    detect_weak_constraints, difficulty_scores, refine, run_curriculum, CurriculumError, Method, PhaseEvent,
    PhasePlan, PhaseRecord,
};
use crate::descriptors::FgCatalog;
use crate::evaluation::{sample_and_rank, similarity_report, EvaluationError};
use crate::neural::{Checkpoint, NeuralError, RmsPropConfig};
use crate::rl::{ConstraintSpec, RlError};
use crate::smiles::Vocabulary;
use crate::training::{ingest, train_prior, write_epoch_log, EpochRecord, PriorConfig, ProspectiveFilter, TrainingError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Training(String),
}

impl CliError {
    /// 1 usage, 2 data error, 3 training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Training(_) => 3,
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::DivergenceDetected(_) | TrainingError::Neural(_) => CliError::Training(e.to_string()),
            TrainingError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<RlError> for CliError {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Neural(_) => CliError::Training(e.to_string()),
            RlError::Io(t) => t.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<CurriculumError> for CliError {
    fn from(e: CurriculumError) -> Self {
        match e {
            CurriculumError::Rl(r) => r.into(),
            CurriculumError::Io(t) => t.into(),
            CurriculumError::InvalidPlan(_) | CurriculumError::PhaseOutOfRange { .. } => CliError::Usage(e.to_string()),
            CurriculumError::EmptyWeakSet => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Rl(r) => r.into(),
            EvaluationError::Io(t) => t.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "molcrl", version, about = "Curriculum RL for multi-objective inverse molecular design")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a SMILES corpus and build its vocabulary.
    Ingest(IngestArgs),
    /// Train the prior language model.
    TrainPrior(TrainPriorArgs),
    /// Profile how often the prior satisfies each group constraint.
    Difficulty(DifficultyArgs),
    /// Fine-tune an agent with a phase plan.
    Finetune(FinetuneArgs),
    /// Sample, score and rank molecules from an agent.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// JSON config or earlier manifest.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rayon threads (0 = all cores). Does not affect results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Raw SMILES file, one molecule per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Keep only C/H/O molecules below `--max-mw`.
    #[arg(long)]
    pub prospective: bool,
    #[arg(long, default_value_t = 200.0)]
    pub max_mw: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainPriorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub embed: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.05)]
    pub heldout_fraction: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 3.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 200)]
    pub validity_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DifficultyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub prior: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(short = 'n', long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FinetuneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub prior: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Plan file; flags below override its values.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// baseline, rf, cf or crf.
    #[arg(long)]
    pub method: Option<String>,
    /// Bins for cf/crf, phases for rf.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kl_weight: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Refinement pass on weakly learned constraints afterwards.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 0.5)]
    pub xi: f64,
    #[arg(long, default_value_t = 256)]
    pub weak_samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub difficulty_samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub agent: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hidden target SMILES for post-hoc similarity.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(short = 'n', long, default_value_t = 256)]
    pub samples: usize,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub top: usize,
}

/// Turn a JSON config object into flags placed ahead of the user's own.
fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let object = value.get("config").unwrap_or(&value);
    let map = object.as_object().ok_or_else(|| CliError::Data(format!("{}: expected a JSON object", path.display())))?;
    let mut out = Vec::new();
    for (k, v) in map {
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(format!("--{k}").into()),
            Value::String(s) => out.extend([format!("--{k}").into(), s.into()]),
            other => out.extend([format!("--{k}").into(), other.to_string().into()]),
        }
    }
    Ok(out)
}

/// Parse arguments, splicing in `--config` values beneath explicit flags.
pub fn parse_args(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let mut config = None;
    for (i, arg) in argv.iter().enumerate() {
        let arg = arg.to_string_lossy();
        if arg == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(v) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        }
    }
    let Some(path) = config.filter(|_| argv.len() >= 2) else { return Cli::try_parse_from(&argv) };
    let flags = config_flags(&path).map_err(|e| clap::Error::raw(clap::error::ErrorKind::Io, format!("{e}\n")))?;
    let mut spliced = argv[..2].to_vec();
    spliced.extend(flags);
    spliced.extend(argv[2..].iter().cloned());
    Cli::try_parse_from(spliced)
}

fn load_catalog() -> FgCatalog {
    FgCatalog::builtin()
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| match e {
        NeuralError::Io(io) => CliError::Data(format!("{}: {io}", path.display())),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

fn load_spec(path: &Path, catalog: &FgCatalog) -> Result<ConstraintSpec, CliError> {
    ConstraintSpec::load(path, catalog).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), CliError> {
    ck.save(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_manifest(dir: &Path, command: &str, config: &impl Serialize, extra: Value) -> Result<(), CliError> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(config).expect("config serializes"),
        "resolved": extra,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&dir.join("manifest.json"), text.as_bytes())
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<String, CliError> {
    let filter = args.prospective.then_some(ProspectiveFilter { max_mw: args.max_mw });
    let (corpus, stats) = ingest(&args.input, filter)?;
    create_dir(&args.out_dir)?;
    corpus.save(&args.out_dir.join("corpus.smi"))?;
    corpus.vocab.save(&args.out_dir.join("vocab.txt")).map_err(|e| CliError::Data(e.to_string()))?;
    write_manifest(&args.out_dir, "ingest", args, json!({ "stats": stats, "vocab_size": corpus.vocab.len() }))?;
    Ok(format!("{stats}; vocabulary {} tokens", corpus.vocab.len()))
}

pub fn prior_config(args: &TrainPriorArgs) -> PriorConfig {
    PriorConfig {
        dims_embed: args.embed,
        dims_hidden: args.hidden,
        dims_layers: args.layers,
        batch_size: args.batch_size,
        epochs: args.epochs,
        patience: args.patience,
        heldout_fraction: args.heldout_fraction,
        optimizer: RmsPropConfig { learning_rate: args.lr, clip: args.clip, ..RmsPropConfig::default() },
        validity_samples: args.validity_samples,
        seed: args.common.seed,
    }
}

pub fn cmd_train_prior(args: &TrainPriorArgs) -> Result<String, CliError> {
    let vocab = Vocabulary::load(&args.vocab).map_err(|e| CliError::Data(format!("{}: {e}", args.vocab.display())))?;
    let (corpus, _) = ingest(&args.corpus, None)?;
    let corpus = corpus.with_vocab(vocab)?;
    let config = prior_config(args);
    if config.batch_size == 0 || config.epochs == 0 || config.dims_hidden == 0 || config.dims_layers == 0 {
        return Err(CliError::Usage("batch size, epochs, hidden size and layers must be positive".into()));
    }
    create_dir(&args.out_dir)?;
    let log_path = args.out_dir.join("epochs.csv");
    let mut log = fs::File::create(&log_path).map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    writeln!(log, "{}", EpochRecord::HEADER).map_err(|e| CliError::Data(e.to_string()))?;
    let outcome = train_prior(&corpus, &config, |r| {
        let _ = writeln!(log, "{}", r.to_line());
        let _ = log.flush();
    })?;
    save_checkpoint(&outcome.checkpoint, &args.out_dir.join("prior.ckpt"))?;
    write_epoch_log(&log_path, &outcome.log)?;
    write_manifest(&args.out_dir, "train-prior", args, json!({ "prior_config": config, "best_epoch": outcome.best_epoch }))?;
    Ok(format!("trained {} epochs, best epoch {}", outcome.log.len(), outcome.best_epoch))
}

pub fn cmd_difficulty(args: &DifficultyArgs) -> Result<String, CliError> {
    let catalog = load_catalog();
    let prior = load_checkpoint(&args.prior)?;
    let spec = load_spec(&args.spec, &catalog)?;
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let report = difficulty_scores(&prior.params, &prior.vocab, &catalog, &spec, args.samples, args.common.seed);
    create_dir(&args.out_dir)?;
    write(&args.out_dir.join("difficulty.csv"), report.to_plot_data(&catalog).as_bytes())?;
    write_manifest(&args.out_dir, "difficulty", args, json!({ "ranking": report.ranking() }))?;
    Ok(format!("easiest to hardest: {:?}", report.ranking()))
}

/// Plan from file, flags and defaults, in that order of precedence (flags win).
pub fn resolve_plan(args: &FinetuneArgs) -> Result<PhasePlan, CliError> {
    let mut plan = match &args.plan {
        Some(path) => PhasePlan::load(path)?,
        None => PhasePlan::baseline(),
    };
    if args.method.is_some() || args.bins.is_some() {
        let method: Method = match &args.method {
            Some(m) => m.parse()?,
            None => plan.method,
        };
        let n = args.bins.unwrap_or(match method {
            Method::Rf => plan.n_phases,
            _ => plan.n_bins,
        });
        let mut fresh = PhasePlan::for_method(method, n);
        fresh.w = plan.w;
        fresh.beta = plan.beta;
        fresh.budget = plan.budget;
        fresh.patience = plan.patience;
        fresh.seed = plan.seed;
        fresh.baseline_reward = plan.baseline_reward;
        fresh.rl = plan.rl.clone();
        plan = fresh;
    }
    if let Some(v) = args.budget {
        plan.budget = v;
    }
    if let Some(v) = args.patience {
        plan.patience = v;
    }
    if let Some(v) = args.w {
        plan.w = v;
    }
    if let Some(v) = args.beta {
        plan.beta = v;
    }
    if let Some(v) = args.kl_weight {
        plan.rl.kl_weight = v;
    }
    if let Some(v) = args.batch_size {
        plan.rl.batch_size = v;
    }
    if let Some(v) = args.lr {
        plan.rl.optimizer.learning_rate = v;
    }
    if args.plan.is_none() {
        plan.seed = args.common.seed;
    }
    plan.validate()?;
    Ok(plan)
}

pub fn cmd_finetune(args: &FinetuneArgs) -> Result<String, CliError> {
    let catalog = load_catalog();
    let prior = load_checkpoint(&args.prior)?;
    let spec = load_spec(&args.spec, &catalog)?;
    let mut plan = resolve_plan(args)?;
    if plan.bins.is_empty() {
        if plan.n_bins > spec.fg.len() {
            return Err(CliError::Usage(format!("{} bins for {} group constraints", plan.n_bins, spec.fg.len())));
        }
        let report = difficulty_scores(&prior.params, &prior.vocab, &catalog, &spec, args.difficulty_samples, plan.seed);
        plan = plan.with_bins(&report)?;
    }
    create_dir(&args.out_dir)?;
    plan.save(&args.out_dir.join("plan.txt"))?;
    let log_path = args.out_dir.join("phase_log.csv");
    let mut log = fs::File::create(&log_path).map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    let _ = writeln!(log, "{}", PhaseRecord::header(&spec));
    let mut sink = |e: &PhaseEvent| {
        let _ = writeln!(log, "{}", e.to_line());
        let _ = log.flush();
    };
    let outcome = run_curriculum(&plan, &prior.params, &prior.vocab, &catalog, &spec, &mut sink)?;
    let checkpoint = |p| Checkpoint::new(p, prior.vocab.clone()).map_err(|e| CliError::Training(e.to_string()));
    for (k, params) in outcome.boundaries.iter().enumerate() {
        save_checkpoint(&checkpoint(params.clone())?, &args.out_dir.join(format!("phase-{}.ckpt", k + 1)))?;
    }
    let mut agent = outcome.agent;
    let mut summary = format!("{} finished: {} iterations", plan.label(), outcome.events.iter().filter(|e| matches!(e, PhaseEvent::Iteration(_))).count());
    let mut refined = json!(null);
    if args.refine {
        let weak = detect_weak_constraints(&agent, &prior.vocab, &catalog, &spec, args.xi, args.weak_samples, plan.seed);
        if weak.weak.is_empty() {
            summary.push_str("; no weakly learned constraints, refinement skipped");
        } else {
            let out = refine(&plan, &agent, &prior.vocab, &catalog, &spec, &weak.weak, &mut sink)?;
            agent = out.agent;
            summary.push_str(&format!("; refined weak constraints {:?}", weak.weak));
        }
        refined = json!({ "q": weak.q, "weak": weak.weak });
    }
    save_checkpoint(&checkpoint(agent)?, &args.out_dir.join("agent.ckpt"))?;
    write_manifest(&args.out_dir, "finetune", args, json!({ "plan": plan, "refinement": refined }))?;
    Ok(summary)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String, CliError> {
    let catalog = load_catalog();
    let agent = load_checkpoint(&args.agent)?;
    let spec = load_spec(&args.spec, &catalog)?;
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if let Some(t) = &args.target {
        if crate::smiles::parse(t).is_err() {
            return Err(EvaluationError::InvalidTarget(t.clone()).into());
        }
    }
    let mut report = sample_and_rank(&agent.params, &agent.vocab, &catalog, &spec, args.samples, args.top, args.common.seed);
    if let Some(t) = &args.target {
        report = similarity_report(&report, t)?;
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(&args.out, report.to_file_string(&catalog).as_bytes())?;
    let manifest_dir = args.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = format!("{}.manifest", args.out.file_name().map_or("report".into(), |n| n.to_string_lossy()));
    let manifest = json!({
        "command": "evaluate",
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(args).expect("config serializes"),
    });
    write(&manifest_dir.join(format!("{name}.json")), (serde_json::to_string_pretty(&manifest).expect("json") + "\n").as_bytes())?;
    Ok(format!("mean top-{} score {:.4}, validity {:.3}", report.top.len(), report.mean_top_score(), report.validity))
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Ingest(a) => &a.common,
        Command::TrainPrior(a) => &a.common,
        Command::Difficulty(a) => &a.common,
        Command::Finetune(a) => &a.common,
        Command::Evaluate(a) => &a.common,
    }
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common(&cli.command).workers)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::TrainPrior(a) => cmd_train_prior(a),
        Command::Difficulty(a) => cmd_difficulty(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let cli = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                clap::error::ErrorKind::Io => 2,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
