use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Samplers, dynamics and identity checks for point configurations on a torus.
#[derive(Debug, Parser)]
#[command(name = "confspace", version)]
pub struct Cli {
    /// Run configuration (TOML). Defaults to the built-in reference config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw (mixed) Poisson samples in the configured window.
    SamplePoisson,
    /// Run the grand canonical birth-death-move chain.
    SampleGibbs,
    /// Free Brownian paths from a Poisson start.
    SimulateFree {
        /// Start from the first configuration of this file instead.
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Interacting diffusion paths from a Gibbs (or given) start.
    SimulateInteracting {
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Run a named verification suite.
    Verify {
        /// One of poisson-identities, mecke, ibp, calculus, semigroup,
        /// martingale, gibbs, invariance, metric, all.
        suite: String,
    },
    /// Matching distance between the first configurations of two files.
    Distance { a: PathBuf, b: PathBuf },
    /// Pair-correlation estimate from a sample set.
    Correlate { samples: PathBuf },
}

/// Exit codes.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VERIFY_FAILED: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
