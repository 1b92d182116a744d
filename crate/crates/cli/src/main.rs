//! `ngmc`: plan, baseline, sweep, simulate, and compare mobile cell
//! placements.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 for
//! internal failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ngmc", version, about = "Mobile 5G cell placement planner")]
struct Cli {
    /// TOML file with [model], [regression], [ga] and [sim] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for scenario generation, the solver, and the simulator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress and summary messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Record the wall-clock time in result files (breaks byte-for-byte reruns).
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random scenario.
    Generate(GenerateArgs),
    /// Search for the best cell position.
    Solve(SolveArgs),
    /// Evaluate the geo-mean position.
    Baseline(ScenarioArg),
    /// Evaluate points along the segment between two UEs.
    Sweep(SweepArgs),
    /// Run the slot-level simulator at a placement from a result file.
    Simulate(SimulateArgs),
    /// Tabulate obtained vs geo-mean gains.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    ues: usize,
    /// Half-width of the cubic volume, meters.
    #[arg(long, default_value_t = 1000.0)]
    half_extent: f64,
    #[arg(long, default_value_t = ngmc_core::scenario::DEFAULT_UE_Z)]
    ue_z: f64,
    #[arg(long, default_value_t = 1)]
    cells: usize,
    #[arg(long)]
    label: Option<String>,
}

#[derive(Debug, Args)]
struct ScenarioArg {
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    scenario: PathBuf,
    /// Also run the exhaustive grid search at this step (meters) and print
    /// the fitness ratio.
    #[arg(long, value_name = "STEP")]
    grid_oracle: Option<f64>,
    /// Let cells move vertically inside the volume.
    #[arg(long)]
    free_z: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    step: f64,
    #[arg(long, default_value_t = 100.0)]
    margin: f64,
    /// Cell height; the model's base-station height when omitted.
    #[arg(long)]
    z: Option<f64>,
    /// Add a simulated aggregate throughput column.
    #[arg(long)]
    simulate: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TrafficArg {
    FullBuffer,
    Cbr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinkArg {
    SeLine,
    McsQuantized,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Result file supplying the cell position(s).
    #[arg(long)]
    result: PathBuf,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Write one row per delivered packet here.
    #[arg(long)]
    delay_csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    traffic: Option<TrafficArg>,
    /// Per-UE offered load for CBR traffic, bit/s.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long, value_enum)]
    link_mode: Option<LinkArg>,
    #[arg(long)]
    harq: bool,
    #[arg(long)]
    error_prob: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(required = true)]
    results: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ngmc_core::Error> for CliError {
    fn from(e: ngmc_core::Error) -> Self {
        match e {
            ngmc_core::Error::Io(_) | ngmc_core::Error::Csv(_) => CliError::Internal(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
