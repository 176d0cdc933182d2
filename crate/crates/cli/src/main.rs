use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Work extraction from sources characterized by a coarse-grained measurement.
#[derive(Debug, Parser)]
#[command(name = "ergoscope", version, about)]
pub struct Cli {
    /// Worker threads for Monte-Carlo shots and time sweeps.
    #[arg(long, global = true, env = "ERGOSCOPE_WORKERS", default_value_t = 1)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Three-level example: Boltzmann, observational and blind extraction.
    ThreeLevel(ThreeLevelArgs),
    /// Quench of the fermion chain with local-energy coarse-graining.
    Chain(ChainArgs),
    /// Monte-Carlo simulation of the measured or unmeasured protocol.
    Protocol(ProtocolArgs),
    /// Check that block-Haar averaging yields the coarse-grained state.
    HaarCheck(HaarArgs),
    /// Every ergotropy and entropy of a state, Hamiltonian and coarse-graining.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed; 0 by default, or the scenario file's seed for `chain`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ThreeLevelArgs {
    /// Comma-separated ascending levels E0,E1,E2.
    #[arg(long, default_value = "0,1,2")]
    pub energies: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Scenario JSON; the twelve-site default when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Density matrix JSON; the three-level mixture diag(1/8, 7/8, 0) when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Hamiltonian JSON; diag(0, 1, 2) when absent.
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
    /// Coarse-graining JSON; {|0>}, {|1>, |2>} when absent.
    #[arg(long = "coarse-graining")]
    pub coarse_graining: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// 1: measure then extract; 2: extract without measuring.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Per-shot log as CSV.
    #[arg(long)]
    pub shots_csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct HaarArgs {
    /// Density matrix JSON; (|1> + |2>)/sqrt 2 when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long = "coarse-graining")]
    pub coarse_graining: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Compare against the input state instead of its coarse-grained form.
    #[arg(long)]
    pub negative_control: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
