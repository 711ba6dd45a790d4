//! `silofair` command-line tool.
//!
//! ```bash
//! silofair --grid-k 2001 audit --data compas.csv --groups African-American,Caucasian --jitter
//! silofair --out msgs sketch --data compas.csv --silos 5
//! silofair federate msgs/
//! ```

mod commands;
mod data;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use silofair::{Error, Execution, GridSpec, Power};

use crate::data::DataArgs;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "silofair", version, about = "Federated demographic-parity audits from quantile sketches")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for jitter, allocation and sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of quantile levels per sketch.
    #[arg(long, global = true, default_value_t = 100)]
    pub grid_k: usize,
    /// Trim both tails by this much before placing the levels.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub trim_eps: f64,
    /// Order of the disparity functional.
    #[arg(long, global = true, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub p: u32,
    /// Write results into this directory instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Run every data-parallel step on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl Global {
    pub fn grid(&self) -> silofair::Result<GridSpec> {
        GridSpec::trimmed(self.grid_k, self.trim_eps)
    }

    pub fn power(&self) -> silofair::Result<Power> {
        Power::try_from(self.p)
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a score CSV and report group counts.
    Ingest(DataArgs),
    /// Centralized audit on pooled data.
    Audit(DataArgs),
    /// Write one `.fqs` message per silo.
    Sketch(SketchArgs),
    /// Run the server-side audit on silo messages.
    Federate(FederateArgs),
    /// Evaluate the concentration and budget calculators.
    Bounds(BoundsArgs),
    /// Allocate rows to silos and write the assignment CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo sweep over grid sizes, silo counts and regimes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Assignment CSV with columns `row_id,silo`.
    #[arg(long, conflicts_with = "silos")]
    pub assignment: Option<PathBuf>,
    /// Random allocation into this many silos when no assignment is given.
    #[arg(long, default_value_t = 1)]
    pub silos: usize,
    /// Also write the JSON mirror next to each `.fqs` file.
    #[arg(long)]
    pub json_mirror: bool,
}

#[derive(Debug, Args)]
pub struct FederateArgs {
    /// Message files (`.fqs` or `.json`) or directories holding them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Smallest per-(silo, group) sample size.
    #[arg(long)]
    pub n_min: u64,
    /// Total sample size; defaults to `n_min * d * groups`.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub d: u64,
    #[arg(long, default_value_t = 2)]
    pub groups: u64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Lower bound on the score densities over the trimmed range.
    #[arg(long, default_value_t = 1.0)]
    pub m_eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Scenario file with keys `regime`, `rho`, `d`, `seed`, `margins`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "random")]
    pub regime: String,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 5)]
    pub silos: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated grid sizes.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80,160")]
    pub ks: Vec<usize>,
    /// Comma-separated silo counts.
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub ds: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "random,positive,negative")]
    pub regimes: Vec<String>,
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    /// Grid size of the centralized reference.
    #[arg(long, default_value_t = 2001)]
    pub reference_k: usize,
}

fn run(cli: Cli) -> silofair::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(g, a),
        Command::Audit(a) => commands::audit(g, a),
        Command::Sketch(a) => commands::sketch(g, a),
        Command::Federate(a) => commands::federate(g, a),
        Command::Bounds(a) => commands::bounds(g, a),
        Command::Simulate(a) => commands::simulate(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
