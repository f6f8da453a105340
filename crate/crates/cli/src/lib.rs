//! Command-line front end for the `hhlab` library.
//!
//! Every subcommand writes a CSV table headed by a provenance line and maps
//! library failures to exit codes: 2 for configuration errors, 3 for domain
//! conditions (no oscillation, no equilibrium bracket, point outside the
//! Hörmander set), 4 for numerical failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<hhlab::Error> for CliError {
    fn from(e: hhlab::Error) -> Self {
        use hhlab::Error as E;
        let text = e.to_string();
        match e {
            E::SpecViolation(_) | E::StepOutOfRange { .. } | E::Domain(_) | E::InvalidState(_) => CliError::Config(text),
            E::NoOscillation { .. } | E::NoBracket { .. } | E::OutsideHormanderSet { .. } => CliError::Domain(text),
            E::StateEscape { .. } | E::OrderTooHigh { .. } | E::EmptyEnsemble => CliError::Numerical(text),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hhlab", version, about = "Hodgkin–Huxley neuron with a stochastic input current")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommandArgs {
    /// JSON file with run parameters; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: RunConfig,
}

impl CommandArgs {
    pub fn merged(&self) -> Result<RunConfig, CliError> {
        match &self.config {
            Some(path) => Ok(RunConfig::from_file(path)?.overridden_by(&self.params)),
            None => Ok(self.params.clone()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zeros of the bracket determinant along the equilibrium curve.
    ScanHormander(CommandArgs),
    /// Stable periodic orbit under a constant or periodic input, with D along it.
    Orbit(CommandArgs),
    /// Sample path or ensemble moments of the stochastic system.
    Simulate(CommandArgs),
    /// Tube probabilities around the controlled reference trajectory.
    Tube(CommandArgs),
    /// Frequency of hitting a ball around a drifted equilibrium.
    Ballhit(CommandArgs),
    /// Laplace transform of the shifted CIR input: printed, Riccati and Monte Carlo.
    Laplace(CommandArgs),
    /// Equilibrium of the deterministic system for a constant input.
    Equilibrium(CommandArgs),
    /// The bracket fields σ, V2..V5 at a point.
    Brackets(CommandArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ScanHormander(_) => "scan-hormander",
            Command::Orbit(_) => "orbit",
            Command::Simulate(_) => "simulate",
            Command::Tube(_) => "tube",
            Command::Ballhit(_) => "ballhit",
            Command::Laplace(_) => "laplace",
            Command::Equilibrium(_) => "equilibrium",
            Command::Brackets(_) => "brackets",
        }
    }

    fn args(&self) -> &CommandArgs {
        match self {
            Command::ScanHormander(a)
            | Command::Orbit(a)
            | Command::Simulate(a)
            | Command::Tube(a)
            | Command::Ballhit(a)
            | Command::Laplace(a)
            | Command::Equilibrium(a)
            | Command::Brackets(a) => a,
        }
    }
}

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.command.args().merged()?;
    let name = cli.command.name();
    let csv = match cli.command {
        Command::ScanHormander(_) => commands::scan_hormander(&cfg)?,
        Command::Orbit(_) => commands::orbit(&cfg)?,
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::Tube(_) => commands::tube(&cfg)?,
        Command::Ballhit(_) => commands::ballhit(&cfg)?,
        Command::Laplace(_) => commands::laplace(&cfg)?,
        Command::Equilibrium(_) => commands::equilibrium(&cfg)?,
        Command::Brackets(_) => commands::brackets(&cfg)?,
    };
    debug_assert!(csv.as_str().contains(&format!("command={name} ")));
    csv.emit(cfg.out.as_deref())
}
