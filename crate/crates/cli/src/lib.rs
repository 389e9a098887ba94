//! Command-line front end for the `symsplit` integrators: single runs,
//! figure reproduction, order tables and parameter sweeps, all written as
//! CSV.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

use clap::{Parser, Subcommand};

pub use config::Options;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NEWTON: u8 = 2;
pub const EXIT_ORDER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "symsplit", version, about = "Corrected symplectic splitting experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write trace.csv.
    Run {
        #[command(flatten)]
        opts: Options,
    },
    /// Reproduce the energy-error traces of figure 1 to 5.
    Figure {
        /// Figure number, 1 to 5.
        figure: u8,
        #[command(flatten)]
        opts: Options,
    },
    /// Measure convergence orders and write orders.csv.
    Order {
        #[command(flatten)]
        opts: Options,
    },
    /// Run every scheme × timestep combination and write sweep.csv.
    Sweep {
        #[command(flatten)]
        opts: Options,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or configuration.
    Config(String),
    /// Bad command-line usage (printed with usage text).
    Usage(String),
    Io(String),
    Library(symsplit::Error),
    /// Measured orders outside the accepted band.
    OrderMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Library(e) => match e.root() {
                symsplit::Error::NewtonDiverged { .. } => EXIT_NEWTON,
                _ => EXIT_CONFIG,
            },
            CliError::OrderMismatch(_) => EXIT_ORDER,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Usage(m) | CliError::Io(m) | CliError::OrderMismatch(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<symsplit::Error> for CliError {
    fn from(e: symsplit::Error) -> Self {
        CliError::Library(e)
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { opts } => commands::run(&opts.resolve()?),
        Command::Figure { figure, opts } => commands::figure(figure, &opts.resolve()?),
        Command::Order { opts } => commands::order(&opts.resolve()?),
        Command::Sweep { opts } => commands::sweep(&opts.resolve()?),
    }
}
