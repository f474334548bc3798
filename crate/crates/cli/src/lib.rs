//! Command-line driver: dataset simulation, fitting, reconstruction,
//! Wigner slices, reports and manifest verification.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "tamq", version, about = "Spin-orbit qudit digital twin")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path (directory or file, depending on the command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write PNG heatmaps.
    #[arg(long, global = true)]
    pub emit_png: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the channel output for a polarization input.
    Channel {
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "circ-oam")]
        basis: String,
    },
    /// Synthesize a 4 × 4 tomography dataset.
    Simulate,
    /// Least-squares mode fit of every image in a dataset.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        /// `oam` (l = -2, 0, 2) or `hb` (HB11, HB20, HB02).
        #[arg(long, default_value = "oam")]
        modes: String,
    },
    /// Maximum-likelihood density matrix of one input.
    Reconstruct {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "circ-oam")]
        basis: String,
        /// Ignore the background recorded in the image metadata.
        #[arg(long)]
        no_background: bool,
    },
    /// Fidelity and purity of a stored density matrix.
    Fidelity {
        #[arg(long)]
        rho: PathBuf,
        /// Output state (J1, J-1, J+, J-) or input polarization.
        #[arg(long, conflicts_with = "target_rho")]
        target: Option<String>,
        #[arg(long)]
        target_rho: Option<PathBuf>,
    },
    /// Wigner function slices of an output state.
    Wigner {
        #[arg(long)]
        state: String,
        /// Density matrix to use instead of the ideal output.
        #[arg(long)]
        rho: Option<PathBuf>,
        /// `all` or a comma-separated list of pair ids such as ReA-ImB.
        #[arg(long, default_value = "all")]
        slices: String,
        #[arg(long, default_value_t = tamq_core::wigner::DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = tamq_core::wigner::DEFAULT_EXTENT)]
        extent: f64,
        /// Modes used as A and B for four-mode states.
        #[arg(long, default_value = "0,1")]
        modes: String,
        /// Also write the difference from the ideal output.
        #[arg(long)]
        compare_ideal: bool,
    },
    /// Fidelity table from stored reconstructions, or a seeded sweep.
    Report {
        #[arg(long)]
        rho: Vec<PathBuf>,
        /// Simulate and reconstruct this many seeds (config `sweep_seeds` if no value).
        #[arg(long, num_args = 0..=1, default_missing_value = "0")]
        sweep: Option<usize>,
    },
    /// Check every file listed in a manifest.
    Verify {
        /// Directory holding manifest.json (defaults to --out or the configured output).
        dir: Option<PathBuf>,
    },
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
