//! Command-line front end: scenario configs, trajectory CSV, stability
//! reports, figure data and parameter sweeps.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when an
//! evolution ends in a singularity or non-finite state.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{FigureId, EXIT_ERROR, EXIT_OK, EXIT_SINGULAR};
pub use config::{Scenario, ScenarioConfig, SCHEMA_VERSION};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "nh-stab", version, about = "Purity dynamics and pure-state stability under non-Hermitian Hamiltonians")]
pub struct Cli {
    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write its trajectory as CSV.
    Evolve {
        config: PathBuf,
        /// Output file; defaults to `outputs.trajectory_csv` or stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic matrix, eigenvalues and classification as JSON.
    Stability {
        config: PathBuf,
        /// Output file; defaults to `outputs.stability_report` or stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the data behind a figure: one CSV per curve plus a manifest.
    Figure {
        #[arg(value_enum)]
        figure: FigureId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a parameter grid from the config's `sweep` section.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: &Cli) -> Result<u8> {
    let q = cli.quiet;
    match &cli.command {
        Command::Evolve { config, out } => commands::cmd_evolve(config, out.as_deref(), q),
        Command::Stability { config, out } => commands::cmd_stability(config, out.as_deref(), q),
        Command::Figure { figure, out } => commands::cmd_figure(*figure, out, q),
        Command::Sweep { config, out } => commands::cmd_sweep(config, out.as_deref(), q),
    }
}
