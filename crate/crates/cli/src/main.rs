//! `memesim`: build networks, run simulations and parameter sweeps, and write
//! the results as CSV files plus a reproducibility manifest.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::LevelFilter;
use memesim::SimError;

use commands::ConfigError;
use config::{resolve, CommonArgs, GridArgs, Settings};

#[derive(Parser)]
#[command(
    name = "memesim",
    version,
    about = "Meme diffusion simulator with social bots"
)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a network and write it as an edge list.
    Generate(CommonArgs),
    /// Run replicates at one parameter point.
    Run(CommonArgs),
    /// Run an experiment over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Continue from the manifest in the output directory.
        #[arg(long)]
        resume: bool,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
}

fn init_logging(level: u8) {
    let filter = match level {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        2 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .parse_default_env()
        .try_init();
}

/// 2 for configuration errors, 3 for failures while running.
fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.downcast_ref::<ConfigError>().is_some()
        || e.chain().any(|c| {
            matches!(
                c.downcast_ref::<SimError>(),
                Some(SimError::InvalidParameter(_))
            )
        });
    if config {
        2
    } else {
        3
    }
}

fn settings(common: &CommonArgs, grid: &GridArgs, verbose: u8) -> Result<Settings> {
    let s = resolve(common, grid).context(ConfigError)?;
    init_logging(verbose.max(s.config.verbosity));
    Ok(s)
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(common) => {
            commands::generate(&settings(common, &GridArgs::default(), cli.verbose)?)
        }
        Command::Run(common) => {
            commands::run(&settings(common, &GridArgs::default(), cli.verbose)?)
        }
        Command::Sweep {
            common,
            grid,
            resume,
            stop_after,
        } => commands::sweep(&settings(common, grid, cli.verbose)?, *resume, *stop_after),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
