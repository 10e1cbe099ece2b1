use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::control::nominal_cruise;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::seed;
use crate::sim::{self, Controller, EmergencyMode, Observation, TrialSetup, VehicleState};
use crate::stats::{wilson95, Interval};

/// The policy Ψ is estimated under: nominal cruise towards `v_target`, with
/// the emergency brake latched as soon as any pedestrian is visible.
#[derive(Debug, Clone, Copy)]
pub struct EstimationPolicy {
    v_target: f64,
    gain: f64,
    bounds: [f64; 2],
}

impl EstimationPolicy {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self { v_target: cfg.v_target, gain: cfg.cruise_gain, bounds: cfg.u_bounds }
    }
}

impl Controller for EstimationPolicy {
    fn emergency_mode(&self) -> EmergencyMode {
        EmergencyMode::Latch
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        Ok(nominal_cruise(obs.state.v, self.v_target, self.gain, self.bounds))
    }
}

fn trial_safe(cfg: &ScenarioConfig, horizon: f64, p0: f64, v0: f64, world_seed: u64) -> Result<bool> {
    let mut policy = EstimationPolicy::new(cfg);
    let setup = TrialSetup::new(VehicleState::new(p0, v0), horizon, world_seed);
    Ok(sim::trial::run_trial_unchecked(cfg, &mut policy, &setup)?.safe)
}

fn check_args(cfg: &ScenarioConfig, horizon: f64, p0: f64, v0: f64) -> Result<()> {
    cfg.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !p0.is_finite() || !v0.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite initial state ({p0}, {v0})")));
    }
    Ok(())
}

/// One safety trial from `(p0, v0)` in the pedestrian world seeded by `seed`.
pub fn ego_safety(cfg: &ScenarioConfig, horizon: f64, p0: f64, v0: f64, seed: u64) -> Result<bool> {
    check_args(cfg, horizon, p0, v0)?;
    trial_safe(cfg, horizon, p0, v0, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEstimate {
    pub psi: f64,
    pub successes: u64,
    pub n: u64,
    pub wilson: Interval,
}

/// Fraction of `n` safe trials. Trial `i` runs in world `seed::world_seed(root_seed, i)`.
pub fn estimate_safety_probability(
    cfg: &ScenarioConfig,
    horizon: f64,
    p0: f64,
    v0: f64,
    n: usize,
    root_seed: u64,
) -> Result<SafetyEstimate> {
    estimate_safety_probability_with(cfg, horizon, p0, v0, n, root_seed, Exec::Sequential)
}

pub fn estimate_safety_probability_with(
    cfg: &ScenarioConfig,
    horizon: f64,
    p0: f64,
    v0: f64,
    n: usize,
    root_seed: u64,
    exec: Exec,
) -> Result<SafetyEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    check_args(cfg, horizon, p0, v0)?;
    let outcomes = exec.try_map(n, |i| trial_safe(cfg, horizon, p0, v0, seed::world_seed(root_seed, i as u64)))?;
    Ok(summarize(&outcomes))
}

pub(crate) fn estimate_unchecked(
    cfg: &ScenarioConfig,
    horizon: f64,
    p0: f64,
    v0: f64,
    n: usize,
    root_seed: u64,
) -> Result<SafetyEstimate> {
    let mut successes = 0u64;
    for i in 0..n {
        successes += u64::from(trial_safe(cfg, horizon, p0, v0, seed::world_seed(root_seed, i as u64))?);
    }
    Ok(from_counts(successes, n as u64))
}

fn summarize(outcomes: &[bool]) -> SafetyEstimate {
    let successes = outcomes.iter().filter(|s| **s).count() as u64;
    from_counts(successes, outcomes.len() as u64)
}

fn from_counts(successes: u64, n: u64) -> SafetyEstimate {
    SafetyEstimate { psi: successes as f64 / n as f64, successes, n, wilson: wilson95(successes, n) }
}
