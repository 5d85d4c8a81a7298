//! Command-line arguments. Model settings live in the JSON config; flags
//! carry paths, seed, threads and verbosity.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "nssm", version, about = "Network state-space models for panel time series")]
pub struct Cli {
    /// Top-level seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "NSSM_THREADS")]
    pub threads: Option<usize>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a network, coefficient paths and a panel.
    Simulate(SimArgs),
    /// Filter and smooth the coefficient path.
    Fit(FitArgs),
    /// Forecast from the last row of the panel.
    Forecast(ForecastArgs),
    /// Rolling-origin evaluation against a baseline.
    Evaluate(EvalArgs),
    /// Spillover norms and coefficient breaks.
    Diagnose(DataArgs),
    /// Impulse responses split by walk length.
    Irf(DataArgs),
    /// Apply the configured perturbation to a network.
    Perturb(PerturbArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Forecast(_) => "forecast",
            Command::Evaluate(_) => "evaluate",
            Command::Diagnose(_) => "diagnose",
            Command::Irf(_) => "irf",
            Command::Perturb(_) => "perturb",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// JSON config; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Panel CSV, wide (`T x N`) or long (`time,node,value`).
    #[arg(long)]
    pub panel: PathBuf,
    /// Edge list or dense matrix.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Covariates as `time,node,z1,...`.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Symmetrize edge lists.
    #[arg(long)]
    pub undirected: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write every filtered and predicted belief.
    #[arg(long)]
    pub dump_states: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Steps ahead; defaults to the largest evaluation horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Networks for the forecast rows, required by the oracle and
    /// user-supplied policies.
    #[arg(long)]
    pub future_network: Option<PathBuf>,
    /// Write every Monte-Carlo draw.
    #[arg(long)]
    pub dump_draws: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Z-score each node's series before fitting and scoring.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub undirected: bool,
    #[arg(long)]
    pub out: PathBuf,
}
