use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::sim::{Controller, EmergencyMode, Observation};

/// Stop-and-go speed profile: brake to a standstill before the crossing,
/// wait, then accelerate back to the target speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanningProfile {
    /// Distance of the stop point before the crossing line (m).
    pub stop_offset: f64,
    pub decel: f64,
    pub accel: f64,
    /// Standstill time at the stop point (s).
    pub dwell: f64,
}

impl Default for PlanningProfile {
    fn default() -> Self {
        Self { stop_offset: 6.0, decel: 1.5, accel: 1.5, dwell: 2.0 }
    }
}

/// Constant deceleration that stops from speed `v` within distance `d`.
pub fn required_decel(v: f64, d: f64) -> f64 {
    if d <= 0.0 {
        if v > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        v * v / (2.0 * d)
    }
}

/// Speeds below this count as standing still (m/s).
const STOPPED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanningPhase {
    Approach,
    Braking,
    Dwell { since: f64 },
    Depart,
}

#[derive(Debug, Clone)]
pub struct Planning {
    pub profile: PlanningProfile,
    pub stop_point: f64,
    pub v_target: f64,
    pub bounds: [f64; 2],
    pub emergency: EmergencyMode,
    phase: PlanningPhase,
}

impl Planning {
    pub fn new(cfg: &ScenarioConfig, profile: PlanningProfile) -> Self {
        Self {
            profile,
            stop_point: cfg.ped_spawn_point[0] - profile.stop_offset,
            v_target: cfg.v_target,
            bounds: cfg.u_bounds,
            emergency: EmergencyMode::Off,
            phase: PlanningPhase::Approach,
        }
    }

    pub fn phase(&self) -> PlanningPhase {
        self.phase
    }

    fn track(&self, v: f64, dt: f64) -> f64 {
        ((self.v_target - v) / dt).clamp(-self.profile.decel, self.profile.accel)
    }
}

impl Controller for Planning {
    fn emergency_mode(&self) -> EmergencyMode {
        self.emergency
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        let (p, v, dt) = (obs.state.p, obs.state.v, obs.dt);
        let d = self.stop_point - p;
        // Implicit Euler covers v*dt/2 less than v^2/(2a) while braking.
        let need = required_decel(v, d + 0.5 * v * dt);
        if self.phase == PlanningPhase::Approach {
            if d <= 0.0 {
                self.phase = PlanningPhase::Depart;
            } else if need >= self.profile.decel {
                self.phase = PlanningPhase::Braking;
            }
        }
        if self.phase == PlanningPhase::Braking && v <= STOPPED {
            self.phase = PlanningPhase::Dwell { since: obs.t };
        }
        if let PlanningPhase::Dwell { since } = self.phase {
            if obs.t - since >= self.profile.dwell - 1e-9 {
                self.phase = PlanningPhase::Depart;
            }
        }
        let u = match self.phase {
            PlanningPhase::Approach | PlanningPhase::Depart => self.track(v, dt),
            PlanningPhase::Braking if v <= self.profile.decel * dt => -v / dt,
            PlanningPhase::Braking => -need.min(v / dt),
            PlanningPhase::Dwell { .. } => -v / dt,
        };
        Ok(u.clamp(self.bounds[0], self.bounds[1]))
    }
}
