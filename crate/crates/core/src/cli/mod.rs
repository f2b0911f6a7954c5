//! Command-line front end: configuration, observable expressions,
//! experiment orchestration and result files.
//!
//! Worker count comes from `ETHLAB_THREADS` (default: all cores); it never
//! changes the numbers written.

pub mod config;
pub mod output;
pub mod run;
pub mod selector;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::Manifest;
pub use run::{run, run_with_threads, RunOptions};
pub use selector::{operator_selector, Observable};

use crate::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ethlab", version, about = "Chaos, ETH and thermalization experiments on qubit and qutrit chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues per symmetry sector.
    Spectrum(Common),
    /// Level-spacing histograms and chaos classification.
    Levels(Common),
    /// Time evolution of observables for an ensemble of states.
    Evolve(Common),
    /// Eigenstate scatter and matrix-element scaling.
    Eth(Common),
    /// Gibbs predictions at target energies and charges.
    Thermal(Common),
    /// Local charge profile of a basis state over time.
    Chargespread(Common),
    /// Late-time averages against predictions over a parameter.
    Sweep(Common),
}

impl Command {
    pub fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::Spectrum(c) => (ExperimentKind::Spectrum, c),
            Command::Levels(c) => (ExperimentKind::Levels, c),
            Command::Evolve(c) => (ExperimentKind::Evolve, c),
            Command::Eth(c) => (ExperimentKind::Eth, c),
            Command::Thermal(c) => (ExperimentKind::Thermal, c),
            Command::Chargespread(c) => (ExperimentKind::ChargeSpread, c),
            Command::Sweep(c) => (ExperimentKind::Sweep, c),
        }
    }
}

/// Worker count from `ETHLAB_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("ETHLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("ETHLAB_THREADS must be a positive integer, got '{v}'"))),
    }
}

fn execute(cli: &Cli) -> Result<Manifest> {
    let (kind, common) = cli.command.split();
    let cfg = ExperimentConfig::load(&common.config)?;
    let opts = RunOptions {
        seed: common.seed,
        out: common.out.clone(),
    };
    match threads_from_env()? {
        Some(n) => run_with_threads(kind, &cfg, &opts, n),
        None => run(kind, &cfg, &opts),
    }
}

/// Parses arguments, runs the experiment and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(m) => {
            let dir = cli.command.split().1.out.clone();
            eprintln!(
                "{}: wrote {} files{} in {:.2}s",
                m.command,
                m.files.len() + 1,
                dir.map(|d| format!(" to {}", d.display())).unwrap_or_default(),
                m.wall_time_seconds
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
