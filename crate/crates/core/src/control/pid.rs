use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::sim::{Controller, EmergencyMode, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup bound on the integrator, |I| ≤ i_limit (m).
    pub i_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 1.0, ki: 0.1, kd: 0.0, i_limit: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID step on the speed error. The derivative term is zero on the first
/// call.
pub fn pid_velocity(v: f64, v_target: f64, gains: &PidGains, state: &mut PidState, dt: f64, bounds: [f64; 2]) -> f64 {
    let e = v_target - v;
    state.integral = (state.integral + e * dt).clamp(-gains.i_limit, gains.i_limit);
    let de = state.prev_error.map_or(0.0, |prev| (e - prev) / dt);
    state.prev_error = Some(e);
    (gains.kp * e + gains.ki * state.integral + gains.kd * de).clamp(bounds[0], bounds[1])
}

/// Speed tracking baseline. It has no notion of risk and by default does not
/// react to visible pedestrians either.
#[derive(Debug, Clone)]
pub struct Pid {
    pub v_target: f64,
    pub gains: PidGains,
    pub bounds: [f64; 2],
    pub emergency: EmergencyMode,
    state: PidState,
}

impl Pid {
    pub fn new(cfg: &ScenarioConfig, gains: PidGains) -> Self {
        Self {
            v_target: cfg.v_target,
            gains,
            bounds: cfg.u_bounds,
            emergency: EmergencyMode::Off,
            state: PidState::default(),
        }
    }

    pub fn state(&self) -> PidState {
        self.state
    }
}

impl Controller for Pid {
    fn emergency_mode(&self) -> EmergencyMode {
        self.emergency
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        Ok(pid_velocity(obs.state.v, self.v_target, &self.gains, &mut self.state, obs.dt, self.bounds))
    }
}
