//! Batch experiments: evaluation of control methods over seeded trials,
//! trade-off sweeps and ablations.
//!
//! Every study runs a fixed grid of (setting, method, trial) items. Trial `i`
//! of a study uses the pedestrian world [`crate::seed::eval_seed`]`(root, i)`
//! for every method and setting, so methods are compared on identical worlds.

pub mod checks;
mod method;
mod spec;
mod study;

pub use method::{build_controller, AnyController, EmergencyPolicy, MethodConfig, MethodKind};
pub use spec::{
    distribution_preset, standard_settings, AlphaStudy, DistributionSpec, ExperimentSpec, Setting, DEFAULT_T_END,
};
pub use study::{
    alpha_ablation, compare_times, distribution_ablation, evaluate, simulate, tradeoff_sweep, write_summaries_csv,
    DistributionCase, DistributionRun, EvalContext, EvalSummary, Evaluation, Rollout, SweepPoint, TrialOutcome,
    BOOTSTRAP_RESAMPLES,
};
