use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "occsafe", version, about = "Occluded-crossing safety toolkit")]
pub struct Cli {
    /// Worker threads; 0 uses every core, 1 runs sequentially. Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the safety probability over a (p, v) grid.
    BuildTable(BuildTableArgs),
    /// Record one rollout of a method.
    Simulate(SimulateArgs),
    /// Evaluate methods over a settings matrix.
    Evaluate(EvaluateArgs),
    /// Safety/efficiency trade-off points per method.
    Sweep(StudyArgs),
    /// Alpha-slope or arrival-distribution ablation.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario TOML file; defaults are used when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override a scenario field, e.g. `--set first_spawn.mean=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BuildTableArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo trials per cell.
    #[arg(long, default_value_t = 500)]
    pub trials: usize,

    /// Risk horizon (s).
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,

    #[arg(long, allow_hyphen_values = true, default_value_t = -180.0)]
    pub p_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 2.0)]
    pub dp: f64,
    #[arg(long, default_value_t = 0.0)]
    pub v_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub v_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dv: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// proposed, worst_case, pid, planning or cruise.
    #[arg(long, default_value = "proposed")]
    pub method: String,

    /// Risk table file (needed by proposed in table mode and by worst_case).
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,

    #[arg(long, allow_hyphen_values = true, default_value_t = -120.0)]
    pub x_init: f64,

    #[arg(long, default_value_t = 0.0)]
    pub v_init: f64,

    /// Safety target 1 - epsilon of the proposed controller.
    #[arg(long, default_value_t = 0.9)]
    pub safety: f64,

    /// Slope of alpha(h) = eta * h.
    #[arg(long)]
    pub eta: Option<f64>,

    /// Estimate the risk online instead of reading a table.
    #[arg(long)]
    pub online: bool,

    #[arg(long, default_value_t = 120.0)]
    pub t_end: f64,

    /// World seed family; the rollout is trial 0 of `evaluate` with this seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,

    /// Experiment spec TOML; command-line flags take precedence over it.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,

    /// Methods to run (comma separated or repeated).
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<String>,

    /// Setting `x_init,v_init[,safety]`. Repeatable; replaces the spec's list.
    #[arg(long = "setting", value_name = "X,V[,S]", allow_hyphen_values = true)]
    pub settings: Vec<String>,

    #[arg(long)]
    pub trials: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub t_end: Option<f64>,

    #[arg(long)]
    pub eta: Option<f64>,

    #[arg(long)]
    pub online: bool,

    /// Skip the embedded checks (the exit code is then 0 or 1).
    #[arg(long)]
    pub no_checks: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub study: StudyArgs,

    /// Also check the risk-table trend (risk grows toward the crossing and
    /// with speed).
    #[arg(long)]
    pub check_trend: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["alpha", "distributions"])))]
pub struct AblateArgs {
    #[command(flatten)]
    pub study: StudyArgs,

    /// Sweep the alpha slope of the proposed controller.
    #[arg(long)]
    pub alpha: bool,

    /// Run the distributions listed in the experiment spec.
    #[arg(long)]
    pub distributions: bool,

    /// Slopes for `--alpha` (comma separated); replaces the spec's list.
    #[arg(long, value_delimiter = ',')]
    pub etas: Vec<f64>,
}
