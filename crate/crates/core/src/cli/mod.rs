//! Command-line entry point: `ccot gen|simulate|eval|perturb|sweep`.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data or pairing error,
//! 3 completed with recorded backend failures.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::protocol::RunMode;
use crate::simbackend::SimKind;

pub use config::{CorruptionSection, PerturbSection, RunConfig, Seeds, SimulateSection, SweepSection};
pub use manifest::{FileDigest, ManifestEntry, RunManifest};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "CCOT_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("completed with {0} failed backend call(s)")]
    Failures(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Failures(_) => 3,
        }
    }
}

/// `faithful`, `copying`, `corrupting` or `remote:ADDR`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendChoice {
    Sim(SimKind),
    Remote(String),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("remote:") {
            if addr.is_empty() {
                return Err("remote backend needs an address, e.g. remote:127.0.0.1:7070".into());
            }
            return Ok(BackendChoice::Remote(addr.to_string()));
        }
        s.parse::<SimKind>().map(BackendChoice::Sim).map_err(|e| e.to_string())
    }
}

impl std::fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendChoice::Sim(SimKind::Faithful) => f.write_str("faithful"),
            BackendChoice::Sim(SimKind::Copying) => f.write_str("copying"),
            BackendChoice::Sim(SimKind::Corrupting) => f.write_str("corrupting"),
            BackendChoice::Remote(a) => write!(f, "remote:{a}"),
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML or JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Maximum concurrent backend calls.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// faithful | copying | corrupting | remote:ADDR
    #[arg(long, value_name = "BACKEND")]
    pub backend: Option<BackendChoice>,
    /// two-step | direct
    #[arg(long, value_name = "MODE")]
    pub mode: Option<RunMode>,
    /// Output directory; defaults to the config's `out_dir`, then
    /// `$CCOT_OUT_DIR/<config name>`, then `runs/<config name>`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Generate the classifier spec and the train/test datasets.
    Gen(CommonArgs),
    /// Run the test set through a backend and write transcripts.
    Simulate(CommonArgs),
    /// Score transcripts against the oracle.
    Eval(CommonArgs),
    /// Flip reasoning tokens, re-run the command turns, report propagation.
    Perturb(CommonArgs),
    /// Evaluate fresh trees across depths.
    Sweep(CommonArgs),
}

#[derive(Clone, Debug, Parser)]
#[command(name = "ccot", version, about = "Reasoning-grounded explanation harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the lines to print on success.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Sweep(a) => commands::sweep(a),
    }
}
