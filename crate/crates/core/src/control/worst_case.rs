use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::risk::RiskSource;
use crate::sim::{Controller, EmergencyMode, Observation};

use super::nominal::Cruise;
use super::psi_in_range;

/// Remaining steps of the current braking pulse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorstCaseTimer {
    pub remaining: u32,
}

/// Any detected risk (re)starts a braking pulse of `pulse_steps`; while a
/// pulse runs the output is `-decel`, otherwise `u_nominal`.
pub fn worst_case(
    visible_risk: bool,
    latent_risk: bool,
    timer: &mut WorstCaseTimer,
    pulse_steps: u32,
    decel: f64,
    u_nominal: f64,
) -> f64 {
    if visible_risk || latent_risk {
        timer.remaining = pulse_steps;
    }
    if timer.remaining > 0 {
        timer.remaining -= 1;
        -decel
    } else {
        u_nominal
    }
}

/// Brakes in fixed pulses whenever Ψ at the current state is below 1.
pub struct WorstCase<'a> {
    risk: Box<dyn RiskSource + 'a>,
    cruise: Cruise,
    decel: f64,
    pulse_steps: u32,
    timer: WorstCaseTimer,
    pub emergency: EmergencyMode,
}

impl<'a> WorstCase<'a> {
    pub fn new(cfg: &ScenarioConfig, risk: Box<dyn RiskSource + 'a>) -> Self {
        Self {
            risk,
            cruise: Cruise::from_config(cfg),
            decel: cfg.worst_case_decel,
            pulse_steps: pulse_steps(cfg.worst_case_pulse, cfg.dt),
            timer: WorstCaseTimer::default(),
            emergency: EmergencyMode::Off,
        }
    }

    pub fn pulse_steps(&self) -> u32 {
        self.pulse_steps
    }
}

fn pulse_steps(duration: f64, dt: f64) -> u32 {
    (duration / dt).round().max(1.0) as u32
}

impl Controller for WorstCase<'_> {
    fn emergency_mode(&self) -> EmergencyMode {
        self.emergency
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        let s = obs.state;
        let latent = psi_in_range(&*self.risk, s.p, s.v)?.is_some_and(|psi| psi < 1.0 - 1e-12);
        Ok(worst_case(false, latent, &mut self.timer, self.pulse_steps, self.decel, self.cruise.u(s.v)))
    }
}
