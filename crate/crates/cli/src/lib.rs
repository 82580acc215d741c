//! Command-line driver: config parsing, subcommand dispatch and run-directory output.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] chns_core::ChnsError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chns",
    version,
    about = "Phase-field flow simulation and pointwise-tracking control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the forward model and write the trajectory.
    Simulate(RunArgs),
    /// Projected-gradient optimization of the control.
    Optimize(RunArgs),
    /// Difference-quotient, Taylor and duality checks of the gradient.
    Gradcheck(RunArgs),
    /// Invariant suite and continuous-dependence ratios.
    Verify(RunArgs),
    /// Print the resolved setup and the model assumption checks.
    Info {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let result = match cli.command {
        Command::Simulate(a) => with_config(&a, commands::simulate),
        Command::Optimize(a) => with_config(&a, commands::optimize),
        Command::Gradcheck(a) => with_config(&a, commands::gradcheck),
        Command::Verify(a) => with_config(&a, commands::verify),
        Command::Info { config } => config::parse_config(&config).and_then(|c| commands::info(&c)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn with_config(
    args: &RunArgs,
    f: impl FnOnce(&config::RunConfig, &std::path::Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = config::parse_config(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::Usage("no run directory: pass --out or set output.dir".into()))?;
    output::prepare_dir(&out)?;
    output::write_json(&out.join("resolved-config.json"), &cfg)?;
    f(&cfg, &out)
}

/// Sizes the global rayon pool from `CHNS_THREADS` (default 1). Results do
/// not depend on the thread count.
fn configure_threads() -> Result<(), CliError> {
    let n = match std::env::var("CHNS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("CHNS_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
