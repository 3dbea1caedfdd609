//! Command-line front end for `hawkes-dt`.
//!
//! Every command resolves and validates its configuration before touching the
//! filesystem, prints one JSON summary line on stdout, and maps failures to
//! stable exit codes: 2 for configuration, 3 for I/O, 4 for a failed
//! verification.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hawkes-dt",
    version,
    about = "Discrete-time Hawkes process simulation and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (CSV for trajectories, JSON or CSV for reports).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for multi-path commands.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Config override `key=value`; dot paths, repeatable.
    #[arg(long = "param", global = true, value_name = "K=V")]
    pub params: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one DTHP chain path and write its trajectory CSV.
    SimulateDthp,
    /// Sample one exact continuous-time path and write its event CSV.
    SimulateExact {
        /// Also write the state sampled on the `steps` grid.
        #[arg(long)]
        states: Option<PathBuf>,
    },
    /// Check that the rescaled one-step operator converges to the generator.
    CheckGenerator,
    /// Compare DTHP marginals with the exact oracle.
    CheckConvergence,
    /// Trajectory of the loss process with the reference parameter set.
    ReproduceFig4,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::SimulateDthp => {
            commands::simulate_dthp(cli, config::Defaults::SIMULATION, "simulate-dthp")
        }
        Command::SimulateExact { states } => commands::simulate_exact(cli, states.as_deref()),
        Command::CheckGenerator => commands::check_generator(cli),
        Command::CheckConvergence => commands::check_convergence(cli),
        Command::ReproduceFig4 => {
            commands::simulate_dthp(cli, config::Defaults::FIG4, "reproduce-fig4")
        }
    }
}
