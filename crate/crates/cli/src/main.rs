//! `opa`: Green functions, squeezing modes and homodyne detection of a pulsed
//! travelling-wave OPA, written out as plot-ready CSV data.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input or configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<opa_core::Error> for CliError {
    fn from(e: opa_core::Error) -> Self {
        use opa_core::Error as E;
        match e {
            E::NonConvergence { .. }
            | E::ConstraintViolation { .. }
            | E::ClusterPairing { .. }
            | E::PhaseAlignment { .. }
            | E::UnphysicalVariances(_)
            | E::AsymmetricKernel(_) => CliError::Numerical(e.to_string()),
            E::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "opa", version, about = "Multimode squeezing in pulsed travelling-wave parametric amplifiers")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; overrides `[output] threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Check the Bogoliubov constraints of the Green functions and exit.
    #[arg(long, global = true)]
    verify: bool,
    /// Saved Green functions to use instead of propagating.
    #[arg(long, global = true, value_name = "PATH")]
    green: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate, compensate and save the Green functions.
    Green,
    /// Bloch-Messiah decomposition into squeezing modes.
    Decompose,
    /// Squeezing lengths across pump strengths.
    Scaling,
    /// Homodyne efficiency for a local oscillator.
    Homodyne,
    /// Closed-form Gaussian model only.
    Gaussian,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("--config is required".into()))?;
    let loaded = config::load(path)?;
    let threads = cli
        .threads
        .or(loaded.config.output.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Input("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot start {threads} worker threads: {e}")))?;
    let out = cli.out.clone().unwrap_or_else(|| loaded.config.output.directory.clone());
    let ctx = commands::Context {
        loaded,
        out,
        green: cli.green,
        verify: cli.verify,
    };
    match cli.command {
        Command::Green => commands::green(&ctx),
        Command::Decompose => commands::decompose_cmd(&ctx),
        Command::Scaling => commands::scaling(&ctx),
        Command::Homodyne => commands::homodyne_cmd(&ctx),
        Command::Gaussian => commands::gaussian(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
