//! Batch front-end for `masolve-core`.
//!
//! ```text
//! masolve <solve|solve-weak|study|verify> --config <path> --out <dir> [--seed N] [--threads N]
//! ```
//!
//! Exit status: 0 on success, 1 for a malformed config or unusable paths,
//! 2 when the problem violates a solvability assumption, 3 when a tolerance
//! is not met. Reports that exist at the time of a tolerance failure are
//! still written.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use masolve_core::measures::MeasureError;
use masolve_core::{EnvelopeError, MeshError, SolveError};

mod commands;
pub mod config;

pub use config::{Problem, ProblemConfig};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "MASOLVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "masolve", version, about = "Generalized Monge-Ampère Dirichlet solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON problem description.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config's Monte-Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to MASOLVE_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Classical Dirichlet problem: report JSON, vertex CSV and facet CSV.
    Solve,
    /// Weak Dirichlet problem over the δ schedule.
    SolveWeak,
    /// Convergence study against the exact radial solution.
    Study,
    /// Assumption validation, comparison check and cell areas vs Monte-Carlo.
    Verify,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("tolerance not met: {0}")]
    Tolerance(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Assumption(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::AssumptionViolation(_) => CliError::Assumption(e.to_string()),
            SolveError::InvalidConfig(_) => CliError::Config(e.to_string()),
            SolveError::Measure(m) => m.into(),
            SolveError::Envelope(EnvelopeError::Geometry(_)) => CliError::Tolerance(e.to_string()),
            SolveError::Envelope(_) => CliError::Config(e.to_string()),
            SolveError::BracketFailure { .. } | SolveError::MaxSweepsExceeded { .. } => {
                CliError::Tolerance(e.to_string())
            }
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::MassExceedsTotal { .. } => CliError::Assumption(e.to_string()),
            MeasureError::ToleranceNotMet { .. } => CliError::Tolerance(e.to_string()),
            MeasureError::InvalidParameter(_) | MeasureError::Table { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::NotStrictlyConvex => CliError::Assumption(e.to_string()),
            _ => CliError::Config(format!("mesh: {e}")),
        }
    }
}

/// Parses arguments and runs one command; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap reports usage errors with status 2, which is reserved here
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("masolve: {e}");
            e.exit_code()
        }
    }
}

/// Runs the parsed command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    configure_threads(cli.threads)?;
    let mut config = ProblemConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let problem = config.resolve(base)?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    match cli.command {
        Command::Solve => commands::solve(&problem, out),
        Command::SolveWeak => commands::solve_weak(&problem, out),
        Command::Study => commands::study(&problem, out),
        Command::Verify => commands::verify(&problem, out),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
