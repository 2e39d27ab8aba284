//! `femcycle equilibria|hopf|cycles --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O error.

mod config;
mod error;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "femcycle", version, about = "Equilibria, Hopf points and limit-cycle branches of ODE models")]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand)]
enum Stage {
    /// Continue equilibria and report Hopf brackets.
    Equilibria(StageArgs),
    /// Refine a Hopf point from a bracket of the equilibria stage or an explicit seed.
    Hopf(StageArgs),
    /// Continue limit cycles from the Hopf point file.
    Cycles(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &StageArgs) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(CliError::io(&args.config))?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(dir) = &args.out {
        config.out_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.stage {
        Stage::Equilibria(a) => stages::run_equilibria(&load(&a)?),
        Stage::Hopf(a) => stages::run_hopf(&load(&a)?),
        Stage::Cycles(a) => stages::run_cycles(&load(&a)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("femcycle: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
