//! ldcube: generate low-discrepancy point sets, run adaptive QMC
//! integrations, sweep the beam benchmark over tolerances, and serve
//! forward models over HTTP.
//!
//! Exit codes are a stable contract: 0 success, 2 usage or schema
//! error, 3 sample budget exhausted, 4 evaluation or transport failure.

mod integrate;
mod points;
mod problem_file;
mod remote;
mod serve_cmd;
mod sweep;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_EVALUATION: u8 = 4;

/// A command failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn evaluation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_EVALUATION,
            message: message.into(),
        }
    }

    pub fn budget(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_BUDGET,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// LDCUBE_SEED overrides any seed given on the command line.
pub fn effective_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("LDCUBE_SEED") {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::usage(format!("LDCUBE_SEED must be an integer, got {text:?}"))),
        Err(_) => Ok(flag),
    }
}

#[derive(Parser)]
#[command(
    name = "ldcube",
    version,
    about = "Quasi-Monte Carlo integration toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a randomized low-discrepancy point set as CSV
    Points(points::PointsArgs),
    /// Run an adaptive integration and print the result as JSON
    Integrate(integrate::IntegrateArgs),
    /// Run the beam tolerance sweep and write records as CSV
    BeamSweep(sweep::SweepArgs),
    /// Serve forward models over HTTP
    Serve(serve_cmd::ServeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Points(args) => points::run(args),
        Command::Integrate(args) => integrate::run(args),
        Command::BeamSweep(args) => sweep::run(args),
        Command::Serve(args) => serve_cmd::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ldcube: {e}");
            ExitCode::from(e.code)
        }
    }
}
