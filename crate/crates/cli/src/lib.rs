//! Command-line runs: configuration, dataset wiring and experiment drivers.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mtgnn::gnn::ModelKind;

pub use config::{template, RunConfig, DATA_DIR_ENV};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mtgnn",
    version,
    about = "Multitask graph neural networks for molecular property regression",
    after_help = "Data files are read from --data-dir, the config's data_dir, $MTGNN_DATA_DIR or ./data, in that order.\n\
                  Exit codes: 0 success, 1 output error, 2 configuration error, 3 data error, 4 training failure."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory receiving the run directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Directory holding the bundled datasets.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated task names.
    #[arg(long, global = true, value_delimiter = ',', value_name = "TASKS")]
    pub tasks: Option<Vec<String>>,
    /// Architecture: gin, ggrnet or gain.
    #[arg(long, global = true, value_name = "KIND")]
    pub model: Option<ModelKind>,
    /// Comma-separated seeds.
    #[arg(long, global = true, value_delimiter = ',', value_name = "SEEDS")]
    pub seeds: Option<Vec<u64>>,
    /// Maximum training epochs.
    #[arg(long, global = true, value_name = "N")]
    pub epochs: Option<usize>,
    /// Folds trained concurrently.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group tasks by label correlation and write groups.txt.
    SelectTargets(SelectArgs),
    /// Train on fold 0 and score the test split.
    Train,
    /// Cross-validate every seed and save a checkpoint per fold.
    Cv,
    /// Score a checkpoint on datasets.
    Eval(EvalArgs),
    /// Leave each task out and retrain only the head of a donor model.
    Transfer,
    /// Single-task versus multitask error as the target's training set grows.
    SizeStudy(SizeArgs),
    /// Time one multitask inference against sequential single-task ones.
    BenchInference(BenchArgs),
    /// Histogram one weight matrix of each checkpoint.
    ExportWeights(WeightArgs),
    /// Correlation-grouped training against one model for all tasks.
    GroupComparison,
    /// Multitask training on the task list against single-task baselines.
    SingleVsMulti(SingleArgs),
    /// Print the 47-slot atom feature schema as JSON.
    FeatureSchema,
    /// Print a commented default configuration.
    ConfigTemplate,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Minimum |r| joining two tasks.
    #[arg(long, value_name = "R")]
    pub threshold: Option<f64>,
    /// Shared molecules needed for a defined correlation.
    #[arg(long, value_name = "N")]
    pub min_overlap: Option<usize>,
    /// File splitting correlation groups into training groups.
    #[arg(long = "override", value_name = "FILE")]
    pub override_file: Option<PathBuf>,
    /// Treat undefined correlations as zero instead of failing.
    #[arg(long)]
    pub skip_undefined: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint JSON written by train or cv.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Dataset for a checkpoint task as TASK=PATH; repeatable.
    #[arg(long = "dataset", value_name = "TASK=PATH")]
    pub datasets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    /// Task whose training set is subsampled.
    #[arg(long, value_name = "TASK")]
    pub target: Option<String>,
    /// Comma-separated tasks trained alongside the target.
    #[arg(long, value_delimiter = ',', value_name = "TASKS")]
    pub companions: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Timed repeats per configuration.
    #[arg(long, value_name = "N")]
    pub repeats: Option<usize>,
    /// Task whose molecules are timed.
    #[arg(long, value_name = "TASK")]
    pub molecules: Option<String>,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Checkpoint as LABEL=PATH; repeatable.
    #[arg(long = "checkpoint", value_name = "LABEL=PATH", required = true)]
    pub checkpoints: Vec<String>,
    /// Parameter name, or fc1/fc2 for the head layers.
    #[arg(long, value_name = "NAME")]
    pub layer: Option<String>,
    /// Histogram bins.
    #[arg(long, value_name = "N")]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    /// Comma-separated tasks given single-task baselines.
    #[arg(long, value_delimiter = ',', value_name = "TASKS")]
    pub singles: Option<Vec<String>>,
}

/// Loads the config file (or defaults) and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &g.data_dir {
        cfg.data_dir = Some(v.clone());
    }
    if let Some(v) = &g.tasks {
        cfg.tasks = v.clone();
    }
    if let Some(v) = g.model {
        cfg.model.kind = v;
    }
    if let Some(v) = &g.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = g.epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = g.jobs {
        cfg.train.jobs = v;
    }
    match &cli.command {
        Command::SelectTargets(a) => {
            if let Some(v) = a.threshold {
                cfg.select.threshold = v;
            }
            if let Some(v) = a.min_overlap {
                cfg.select.min_overlap = v;
            }
            if let Some(v) = &a.override_file {
                cfg.select.override_file = Some(v.clone());
            }
            cfg.select.skip_undefined |= a.skip_undefined;
        }
        Command::SizeStudy(a) => {
            if let Some(v) = &a.target {
                cfg.experiment.target = v.clone();
            }
            if let Some(v) = &a.companions {
                cfg.experiment.companions = v.clone();
            }
        }
        Command::BenchInference(a) => {
            if let Some(v) = a.repeats {
                cfg.experiment.repeats = v;
            }
            if let Some(v) = &a.molecules {
                cfg.experiment.bench_molecules = v.clone();
            }
        }
        Command::ExportWeights(a) => {
            if let Some(v) = &a.layer {
                cfg.experiment.layer = v.clone();
            }
            if let Some(v) = a.bins {
                cfg.experiment.bins = v;
            }
        }
        Command::SingleVsMulti(a) => {
            if let Some(v) = &a.singles {
                cfg.experiment.singles = v.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::SelectTargets(_) => "select-targets",
        Command::Train => "train",
        Command::Cv => "cv",
        Command::Eval(_) => "eval",
        Command::Transfer => "transfer",
        Command::SizeStudy(_) => "size-study",
        Command::BenchInference(_) => "bench-inference",
        Command::ExportWeights(_) => "export-weights",
        Command::GroupComparison => "group-comparison",
        Command::SingleVsMulti(_) => "single-vs-multi",
        Command::FeatureSchema => "feature-schema",
        Command::ConfigTemplate => "config-template",
    }
}

/// Runs one command; returns the run directory when one was created.
pub fn run(cli: &Cli) -> Result<Option<PathBuf>, CliError> {
    match &cli.command {
        Command::FeatureSchema => {
            println!("{}", commands::feature_schema());
            return Ok(None);
        }
        Command::ConfigTemplate => {
            print!("{}", template());
            return Ok(None);
        }
        _ => {}
    }
    let cfg = resolve_config(cli)?;
    let dir = commands::create_run_dir(&cfg, command_name(&cli.command))?;
    match &cli.command {
        Command::SelectTargets(_) => commands::select_targets(&cfg, &dir).map(|_| ())?,
        Command::Train => commands::train(&cfg, &dir)?,
        Command::Cv => commands::cv(&cfg, &dir)?,
        Command::Eval(a) => commands::eval(&cfg, &dir, &a.checkpoint, &a.datasets)?,
        Command::Transfer => commands::transfer(&cfg, &dir)?,
        Command::SizeStudy(_) => commands::size_study(&cfg, &dir)?,
        Command::BenchInference(_) => commands::bench_inference(&cfg, &dir)?,
        Command::ExportWeights(a) => commands::export_weights(&cfg, &dir, &a.checkpoints)?,
        Command::GroupComparison => commands::group_comparison(&cfg, &dir)?,
        Command::SingleVsMulti(_) => commands::single_vs_multi(&cfg, &dir)?,
        Command::FeatureSchema | Command::ConfigTemplate => unreachable!("handled above"),
    }
    Ok(Some(dir))
}
