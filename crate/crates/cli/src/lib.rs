//! Command-line interface: argument parsing, configuration layering, thread
//! pool setup, and the mapping from error classes to process exit codes.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::sync::Once;

use clap::{Parser, Subcommand};

use config::RunConfig;

pub const EXIT_OK: i32 = 0;
/// Configuration and usage mistakes: malformed config, bad flag values.
pub const EXIT_CONFIG: i32 = 2;
/// Filesystem problems: missing or unwritable paths.
pub const EXIT_IO: i32 = 3;
/// Dataset problems: unparseable rows, empty or unlabeled data.
pub const EXIT_DATA: i32 = 4;
/// Model problems: divergence, singular solves, artifact mismatches.
pub const EXIT_MODEL: i32 = 5;
/// Explanation problems: degenerate backgrounds, oversized enumerations.
pub const EXIT_EXPLAIN: i32 = 6;
/// Pipeline problems: empty selections, fully failed grids.
pub const EXIT_PIPELINE: i32 = 7;

/// A failed command: the exit code plus the message printed to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<rul_core::Error> for Failure {
    fn from(e: rul_core::Error) -> Self {
        Failure { code: classify(&e), message: e.to_string() }
    }
}

/// Exit-code class by root cause; stage wrappers color the message, never
/// the class.
pub fn classify(e: &rul_core::Error) -> i32 {
    use rul_core::Error::*;
    match e.root() {
        InvalidArgument(_) => EXIT_CONFIG,
        Io(_) => EXIT_IO,
        Parse { .. } | EmptyDataset | Unlabeled => EXIT_DATA,
        ArityMismatch { .. } | Diverged { .. } | SingularSystem | UnsupportedVersion { .. }
        | Serde(_) => EXIT_MODEL,
        DegenerateBackground | SubsetTooLarge { .. } => EXIT_EXPLAIN,
        EmptySelection | AllCombinationsFailed | Stage { .. } => EXIT_PIPELINE,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rul-explain",
    version,
    about = "Train and explain remaining-useful-life regressors on turbofan telemetry"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Telemetry file in 26-column C-MAPSS text format.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,

    /// Top-level seed; every stage derives its own stream from it.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory for artifacts, reports and renderings.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic run-to-failure telemetry file.
    Simulate {
        /// Engines to simulate; defaults to the config value.
        #[arg(long, value_name = "N")]
        units: Option<usize>,
        /// Gaussian noise multiplier; defaults to the config value.
        #[arg(long, value_name = "X")]
        noise: Option<f64>,
        /// Destination file; defaults to <out>/synthetic.txt.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Train every configured family; write model artifacts and a report.
    Train,
    /// Score a saved model on a dataset and report MSE and MAE.
    Evaluate {
        /// Model artifact produced by `train`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
    },
    /// Cross-validated search over the configured hyperparameter grids.
    GridSearch,
    /// Rank features by forest importance and show the selection cut.
    RankFeatures,
    /// Explain one prediction of a saved model.
    Explain {
        /// Model artifact produced by `train`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Dataset row to explain (0-based).
        #[arg(long, value_name = "N")]
        row: usize,
        /// lime, shap, or exact; defaults to the config value.
        #[arg(long, value_name = "NAME")]
        method: Option<String>,
        /// bar, force, or text; defaults to the config value.
        #[arg(long, value_name = "NAME")]
        style: Option<String>,
    },
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::new(EXIT_CONFIG, e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    if let Some(data) = cli.data {
        config.data.path = Some(data);
    }
    match cli.command {
        Command::Simulate { units, noise, output } => {
            commands::simulate(&config, units, noise, output)
        }
        Command::Train => commands::train(&config),
        Command::Evaluate { model } => commands::evaluate(&config, &model),
        Command::GridSearch => commands::grid_search_cmd(&config),
        Command::RankFeatures => commands::rank_features(&config),
        Command::Explain { model, row, method, style } => {
            commands::explain(&config, &model, row, method.as_deref(), style.as_deref())
        }
    }
}

/// RUL_EXPLAIN_THREADS caps the worker threads used by every parallel
/// section. The rayon pool is global and set once per process; later calls
/// are no-ops.
fn init_threads() -> Result<(), Failure> {
    static INIT: Once = Once::new();
    let mut outcome = Ok(());
    INIT.call_once(|| {
        if let Ok(raw) = std::env::var("RUL_EXPLAIN_THREADS") {
            match raw.trim().parse::<usize>() {
                Ok(n) if n >= 1 => {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
                _ => {
                    outcome = Err(Failure::new(
                        EXIT_CONFIG,
                        format!("RUL_EXPLAIN_THREADS must be a positive integer, got {raw:?}"),
                    ));
                }
            }
        }
    });
    outcome
}
