use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::sim::{Controller, EmergencyMode, Observation};

/// Proportional speed tracking, clamped to `bounds = [u_min, u_max]`.
pub fn nominal_cruise(v: f64, v_target: f64, gain: f64, bounds: [f64; 2]) -> f64 {
    (gain * (v_target - v)).clamp(bounds[0], bounds[1])
}

/// Nominal cruise as a controller.
#[derive(Debug, Clone)]
pub struct Cruise {
    pub v_target: f64,
    pub gain: f64,
    pub bounds: [f64; 2],
    pub emergency: EmergencyMode,
}

impl Cruise {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self { v_target: cfg.v_target, gain: cfg.cruise_gain, bounds: cfg.u_bounds, emergency: EmergencyMode::Off }
    }

    pub fn with_emergency(mut self, mode: EmergencyMode) -> Self {
        self.emergency = mode;
        self
    }

    pub fn u(&self, v: f64) -> f64 {
        nominal_cruise(v, self.v_target, self.gain, self.bounds)
    }
}

impl Controller for Cruise {
    fn emergency_mode(&self) -> EmergencyMode {
        self.emergency
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        Ok(self.u(obs.state.v))
    }
}
