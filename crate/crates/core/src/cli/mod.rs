//! The `dynlab` command line: JSON run configs, one subcommand per analysis,
//! and deterministic CSV/JSON outputs.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{Format, InitialState, RunConfig, Start};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_OUTPUT: u8 = 3;
pub const EXIT_INTEGRATION: u8 = 4;
pub const EXIT_NOT_ON_LIMIT_SET: u8 = 5;

/// Environment variable capping the worker threads of `scan`.
pub const THREADS_ENV: &str = "DYNLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }

    pub fn output(message: impl Into<String>) -> Self {
        Self::new(EXIT_OUTPUT, message)
    }

    pub fn integration(message: impl Into<String>) -> Self {
        Self::new(EXIT_INTEGRATION, message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "dynlab", version, about = "Simulate and analyse the averaged pendulum / motor system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run config (a sidecar from an earlier run is accepted too).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set params.C=-2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it with a sidecar.
    Simulate(CommonArgs),
    /// Check the exact identities on random states and trajectories.
    Verify(CommonArgs),
    /// Compare the full flow with the reduced flow on an invariant plane.
    Reduce(CommonArgs),
    /// Lyapunov spectrum with its convergence trace.
    Lyapunov(CommonArgs),
    /// Parameter sweep producing classification and bifurcation data.
    Scan(CommonArgs),
    /// Print the equilibrium and its eigenvalues as JSON.
    Equilibrium(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::Reduce(_) => "reduce",
            Command::Lyapunov(_) => "lyapunov",
            Command::Scan(_) => "scan",
            Command::Equilibrium(_) => "equilibrium",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Verify(a)
            | Command::Reduce(a)
            | Command::Lyapunov(a)
            | Command::Scan(a)
            | Command::Equilibrium(a) => a,
        }
    }
}

/// Loads the config for `command` and runs it. Returns the exit code.
pub fn execute(command: &Command) -> Result<u8, CliError> {
    let args = command.args();
    let mut cfg = RunConfig::load(&args.config, &args.set)?;
    if let Some(out) = &args.out {
        cfg.output.directory.clone_from(out);
    }
    match command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Verify(_) => commands::verify(&cfg),
        Command::Reduce(_) => commands::reduce(&cfg),
        Command::Lyapunov(_) => commands::lyapunov(&cfg),
        Command::Scan(_) => commands::scan(&cfg),
        Command::Equilibrium(_) => commands::equilibrium(&cfg),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dynlab {}: {}", cli.command.name(), e.message);
            ExitCode::from(e.code)
        }
    }
}
