//! `nagumo`: phase portraits, thresholds, stretching checks, chaotic
//! realizations and connecting orbits from a JSON run config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nagumo_core::Error;

use config::ConfigError;
use output::Status;

#[derive(Parser)]
#[command(name = "nagumo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level curves of the frozen systems, tagged by class.
    Portrait(RunArgs),
    /// T1*, T2*(M), tau, tau' and eps*(M) in both modes.
    Thresholds(RunArgs),
    /// Stretching checks for the six standard relations and the block map.
    VerifyStretch(RunArgs),
    /// Realize an itinerary, or a periodic one when `ell` is set.
    Chaos(RunArgs),
    /// Heteroclinic or homoclinic connection.
    Connect(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// 2 for rejected input, 3 for numerical failure, 1 for anything else.
pub(crate) fn exit_code(e: &anyhow::Error) -> u8 {
    if e.is::<ConfigError>() {
        return EXIT_VALIDATION;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::Domain(_)
            | Error::NoHomoclinic
            | Error::IndexOutOfWindow { .. }
            | Error::ThresholdViolation { .. }
            | Error::InvalidItinerary(_),
        ) => EXIT_VALIDATION,
        Some(_) => EXIT_NUMERICAL,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (args, cmd): (RunArgs, fn(&config::RunConfig, &std::path::Path) -> anyhow::Result<Status>) = match cli.command {
        Command::Portrait(a) => (a, commands::portrait),
        Command::Thresholds(a) => (a, commands::thresholds),
        Command::VerifyStretch(a) => (a, commands::verify),
        Command::Chaos(a) => (a, commands::chaos),
        Command::Connect(a) => (a, commands::connect_cmd),
    };
    let cfg = config::load(&args.config)?;
    let out = args.out.or_else(|| cfg.out.clone()).ok_or_else(|| ConfigError("no output directory".into()))?;
    std::fs::create_dir_all(&out)?;
    cmd(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("nagumo: checks did not pass; see the report");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("nagumo: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
