//! `ppkm` — operator surface for the privacy-preserving k-means toolkit.
//!
//! Five subcommands cover the whole workflow: `plan-params` sizes the
//! randomization parameters for a deployment, `run` executes the
//! multi-server protocol (in-process or against TCP daemons started with
//! `serve`), `oracle` runs the plaintext reference clustering for
//! comparison, and `analyze` evaluates the leakage bounds and attack-cost
//! projections on transcripts or explicit inputs.
//!
//! Everything is batch-oriented: JSON on stdout (or `--table` for aligned
//! text), artifacts as files, determinism under `--seed`. Exit codes: 0
//! success, 1 runtime failure, 2 usage error.

mod analyze;
mod data;
mod oracle;
mod plan;
mod run;
mod serve;

use clap::{Parser, Subcommand};

/// Failure taxonomy behind the exit-code contract: usage problems clap
/// cannot catch (flag combinations, env values) exit 2, everything that
/// goes wrong while actually working exits 1.
#[derive(Debug)]
pub(crate) enum CmdError {
    Usage(String),
    Runtime(ppkm::Error),
}

pub(crate) type CmdResult = Result<(), CmdError>;

impl From<ppkm::Error> for CmdError {
    fn from(err: ppkm::Error) -> Self {
        CmdError::Runtime(err)
    }
}

impl From<std::io::Error> for CmdError {
    fn from(err: std::io::Error) -> Self {
        CmdError::Runtime(ppkm::Error::from(err))
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(err: serde_json::Error) -> Self {
        CmdError::Runtime(ppkm::Error::from(err))
    }
}

/// Resolves the master seed: explicit flag, else the `PPKM_SEED`
/// environment variable, else 0.
pub(crate) fn resolve_seed(flag: Option<u64>) -> Result<u64, CmdError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("PPKM_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CmdError::Usage(format!("PPKM_SEED must be an unsigned integer, got {raw:?}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(err) => Err(CmdError::Usage(format!("PPKM_SEED: {err}"))),
    }
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub(crate) fn to_json_text<T: serde::Serialize>(value: &T) -> Result<String, CmdError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Parser)]
#[command(
    name = "ppkm",
    version,
    about = "Privacy-preserving multi-server k-means: plan, run, compare, analyze"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-server clustering protocol on a CSV dataset
    Run(run::RunArgs),
    /// Cluster a CSV dataset in plaintext with the reference algorithm
    Oracle(oracle::OracleArgs),
    /// Evaluate guessing-probability security levels for a deployment size
    #[command(name = "plan-params", alias = "plan")]
    PlanParams(plan::PlanArgs),
    /// Evaluate leakage divergence bounds and attack-cost projections
    Analyze(analyze::AnalyzeArgs),
    /// Host one protocol role (serverN or aggregator) as a TCP daemon
    Serve(serve::ServeArgs),
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Oracle(args) => oracle::cmd_oracle(args),
        Command::PlanParams(args) => plan::cmd_plan(args),
        Command::Analyze(args) => analyze::cmd_analyze(args),
        Command::Serve(args) => serve::cmd_serve(args),
    };
    match result {
        Ok(()) => 0,
        Err(CmdError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CmdError::Runtime(err)) => {
            eprintln!("error: {err}");
            1
        }
    }
}
