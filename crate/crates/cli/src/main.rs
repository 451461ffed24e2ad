//! `dissipad`: reproduce the dissipative pairing experiments from the command line.

mod commands;
mod manifest;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dissipad", version, about = "Dissipative pairing in fermionic lattices and qubit chains")]
pub struct Cli {
    /// Directory for CSV, JSON and manifest outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Spin,
    Fermion,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    Vacuum,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Dephasing,
    Relaxation,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dissipators {
    Single,
    Pair,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check chiral symmetry, the pairing constraint and dark modes.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Slowest Liouvillian eigenvalues for each pairing strength.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "fermion")]
        system: System,
        /// Comma-separated v^2 values; defaults to the config value.
        #[arg(long, value_delimiter = ',')]
        v2: Vec<f64>,
        /// Number of eigenvalues per v^2.
        #[arg(long, default_value_t = 16)]
        k: usize,
    },
    /// Observable trajectories on a logarithmic time grid.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "spin")]
        system: System,
        #[arg(long, default_value_t = 1e4)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Comma-separated observable names; defaults to all available.
        #[arg(long, value_delimiter = ',')]
        observables: Vec<String>,
        #[arg(long, value_enum, default_value = "vacuum")]
        initial: Initial,
    },
    /// Steady-state bond concurrences under local noise.
    Robustness {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated noise rates in units of the pairing rate.
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.003,0.01,0.03,0.1")]
        noise_grid: Vec<f64>,
        #[arg(long, value_enum, default_value = "dephasing")]
        noise: NoiseKind,
        #[arg(long, value_enum, default_value = "pair")]
        dissipators: Dissipators,
        /// Comma-separated v^2 grid searched for the best concurrence of each bond.
        #[arg(long, value_delimiter = ',')]
        v2: Vec<f64>,
    },
    /// Sideband-driven cavity: resonant couplings and elimination check.
    Cavity {
        /// Key-value hardware preset; the built-in device numbers when absent.
        #[arg(long)]
        preset: Option<PathBuf>,
        /// Also sweep the cavity loss at fixed couplings.
        #[arg(long)]
        kappa_sweep: bool,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("DISSIPAD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match commands::run(&cli) {
        Ok(outcome) => {
            if !outcome.passed {
                for r in &outcome.reasons {
                    eprintln!("fail: {r}");
                }
            }
            ExitCode::from(if outcome.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
