//! The `mrp` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 model error, 5 artifact error.

mod commands;
mod predict;

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::dataset::{DataError, DEFAULT_SEED, DEFAULT_TEST_FRACTION};
use crate::metrics::MetricError;
use crate::models::{ModelError, ModelKind};
use crate::persist::PersistError;
use crate::preprocess::PreprocessError;
use crate::tuning::TuningError;

pub use commands::{artifact_stem, cmd_evaluate, cmd_select_features, cmd_summarize, cmd_train, TrainOutcome};
pub use predict::{cmd_predict, format_currency, PredictRequest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid field `{0}`")]
    InvalidField(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::InvalidField(_)
            | CliError::Data(_)
            | CliError::Preprocess(_)
            | CliError::Analysis(_)
            | CliError::Io { .. } => 3,
            CliError::Model(_) | CliError::Metric(_) | CliError::Tuning(_) => 4,
            CliError::Persist(_) => 5,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mrp", version, about = "Movie revenue prediction: train, evaluate and query regression models")]
pub struct Cli {
    /// Worker threads for ensemble fitting and grid search (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, split, fit and evaluate one model; save it as an artifact.
    Train(TrainArgs),
    /// Predict the gross of a new movie from a saved artifact.
    Predict(PredictArgs),
    /// Write summary statistics, country counts and the gross histogram.
    Summarize(SummarizeArgs),
    /// Rank features by univariate F score against gross.
    SelectFeatures(SelectArgs),
    /// Score a saved artifact on a CSV file.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// One of: linear, tree, bagging, forest, xgb, gbm.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Grid JSON file, or `default` for the built-in grid of the model family.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = crate::tuning::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Skip standard scaling (scaling is on by default for linear regression only).
    #[arg(long)]
    pub no_scale: bool,
    /// Skip log1p on budget and gross.
    #[arg(long)]
    pub no_log_money: bool,
    /// Write the per-iteration training R² curve (boosting models only).
    #[arg(long)]
    pub track_r2: Option<PathBuf>,
    /// Report R²/MAPE/MSE in currency units instead of log space.
    #[arg(long)]
    pub raw_space_metrics: bool,
    /// Artifact path, conventionally `<name>.mrp.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct PredictArgs {
    /// An artifact file, or a directory holding `<model>.mrp.json` files.
    #[arg(long)]
    pub artifact: PathBuf,
    /// JSON object with the 14 feature values; prompts interactively when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Model to use when `--artifact` is a directory.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Also write/print only features scoring strictly above this value.
    #[arg(long)]
    pub min_score: Option<f64>,
    /// Score one 0/1 indicator per (column, category) instead of label codes.
    #[arg(long)]
    pub expand_categories: bool,
    /// Output CSV path.
    #[arg(long, default_value = "fscores.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub raw_space_metrics: bool,
    /// Optional CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub(crate) fn parse_model(id: &str) -> Result<ModelKind, CliError> {
    id.parse().map_err(|_| {
        CliError::Usage(format!(
            "unknown model `{id}` (expected one of: linear, tree, bagging, forest, xgb, gbm)"
        ))
    })
}

/// Runs one parsed command, writing human-readable output to `out` and reading
/// interactive answers from `input`. `--threads` is applied by the binary, which
/// owns the global thread pool.
pub fn run(cli: Cli, out: &mut dyn Write, input: &mut dyn BufRead) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a, out, input).map(|_| ()),
        Command::Summarize(a) => cmd_summarize(&a, out),
        Command::SelectFeatures(a) => cmd_select_features(&a, out).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a, out).map(|_| ()),
    }
}
