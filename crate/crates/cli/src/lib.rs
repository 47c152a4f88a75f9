//! The `eggq` command-line pipeline: ingestion, cross-validated evaluation,
//! ensembles, reports and feature-file checks.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod study;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use eggq_core::dataset::{TabularFeature, Task};
use eggq_core::evaluation::{EnsemblePreset, EvalMode};

pub use error::{CliError, ExitKind};

/// Sets the worker pool size for parallel cross-validation.
pub const THREADS_ENV: &str = "EGGQ_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "eggq",
    version,
    about = "Egg grade and freshness classification pipeline"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate measurement and feature files and write a labeled dataset.
    Ingest(IngestArgs),
    /// Cross-validate classifiers on every input column and write leaderboards.
    Evaluate(EvaluateArgs),
    /// Cross-validate a majority-vote ensemble preset.
    Ensemble(EnsembleArgs),
    /// Render ROC and confusion SVGs from a run directory.
    Report(ReportArgs),
    /// Check feature files against the known backbone widths.
    ExtractCheck(ExtractCheckArgs),
    /// Write the synthetic corpus to a directory.
    Synth(SynthArgs),
    /// Score a feature file with a saved model bundle.
    Predict(PredictArgs),
}

/// Options shared by commands that run the modelling pipeline.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<Task>,
    /// `paper` (resample and project before splitting) or `foldsafe`.
    #[arg(long)]
    pub mode: Option<EvalMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Corpus directory; defaults to the config, then $EGGQ_PUBLISHED_DIR,
    /// then the synthetic corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, required_unless_present = "corpus")]
    pub measurements: Option<PathBuf>,
    /// Image feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Corpus directory, used with --extractor.
    #[arg(long, conflicts_with_all = ["measurements", "features"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub extractor: Option<String>,
    #[arg(long)]
    pub task: Task,
    /// Tabular columns to fuse; empty for image features only.
    #[arg(long, value_delimiter = ',', default_value = "weight,shape_index")]
    pub tabular: Vec<TabularFeature>,
    /// Use only the image features.
    #[arg(long)]
    pub image_only: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// `preset` (one cell per family) or `full`.
    #[arg(long)]
    pub grid: Option<study::GridChoice>,
    /// Also fit the best cell on all rows and save it as `model.eggq`.
    #[arg(long)]
    pub bundle: bool,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub preset: EnsemblePreset,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding `roc.csv` and/or `confusion.csv`.
    #[arg(long)]
    pub run: PathBuf,
    /// Defaults to the run directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExtractCheckArgs {
    /// Feature CSVs or directories of them.
    pub paths: Vec<PathBuf>,
    /// Print the reference backbone table.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Needed when the bundle expects fused tabular columns.
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    /// Output CSV.
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Builds the global rayon pool from [`THREADS_ENV`] if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        CliError::config(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))
    })?;
    if n == 0 {
        return Err(CliError::config(format!("{THREADS_ENV} must be positive")));
    }
    // A pool built earlier in the process wins; that is fine for tests.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ensemble(a) => commands::ensemble(&a),
        Command::Report(a) => commands::report(&a),
        Command::ExtractCheck(a) => commands::extract_check(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Predict(a) => commands::predict(&a),
    }
}
