//! `hppa-cert`: configuration-driven experiment runner for the anchored
//! proximal point iteration and its rate certification.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hppa_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser)]
#[command(
    name = "hppa-cert",
    about = "Run anchored proximal point experiments, evaluate exact rates, \
             and certify trajectories against the bound inequalities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step budget override.
    #[arg(long)]
    budget: Option<usize>,
    /// k range override for rate tables and witness search.
    #[arg(long)]
    kmax: Option<u64>,
    /// Seed override for pseudo-random error directions.
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt one late iterate before certification; the checks must fail.
    #[arg(long, default_value_t = false)]
    fault_inject: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured iteration and write the trajectory CSV.
    Iterate(CommonArgs),
    /// Evaluate all applicable rates and write the rate table CSV.
    Rates(CommonArgs),
    /// Check every applicable inequality and write the report JSON.
    Certify(CommonArgs),
    /// Run the packaged worked example end to end.
    Example5(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, runner): (&CommonArgs, fn(&run::Context) -> Result<run::Outcome, CliError>) =
        match &cli.command {
            Command::Iterate(a) => (a, run::cmd_iterate),
            Command::Rates(a) => (a, run::cmd_rates),
            Command::Certify(a) => (a, run::cmd_certify),
            Command::Example5(a) => (a, run::cmd_example5),
        };
    let ctx = match run::Context::load(args) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runner(&ctx) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("certification failed; see report.json");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
