//! `bohmdecay`: runs the delta-shell decay pipelines and writes CSV tables
//! plus a `manifest.json` describing the run.

mod commands;
mod config;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use run::Failure;

#[derive(Debug, Parser)]
#[command(name = "bohmdecay", version, about = "Bohmian trajectories for a particle leaking out of a delta-shell barrier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Pole table with residuals and health diagnostics.
    Poles,
    /// Equal-Δs ensemble of trajectories and their barrier crossings.
    Fig1,
    /// Escape times against the exponential law.
    Fig2,
    /// First escapes against √n.
    Fig2a,
    /// Trajectories seeded late and traced back to the start.
    Fig3,
    /// Quantum potential U(r,t) on a grid.
    Fig4,
    /// Nonescape probability, decay-law fits and the charge curve.
    Decay,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Poles => "poles",
            Command::Fig1 => "fig1",
            Command::Fig2 => "fig2",
            Command::Fig2a => "fig2a",
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Decay => "decay",
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = RunConfig::resolve(&cli.overrides).map_err(Failure::Config)?;
    if let Some(threads) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let name = cli.command.name();
    match cli.command {
        Command::Poles => commands::poles(&config, name),
        Command::Fig1 => commands::fig1(&config, name),
        Command::Fig2 => commands::fig2(&config, name),
        Command::Fig2a => commands::fig2a(&config, name),
        Command::Fig3 => commands::fig3(&config, name),
        Command::Fig4 => commands::fig4(&config, name),
        Command::Decay => commands::decay(&config, name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("bohmdecay: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
