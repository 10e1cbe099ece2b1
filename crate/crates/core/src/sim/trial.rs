use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::seed;

use super::pedestrian::PedestrianStream;
use super::vehicle::{step_vehicle, VehicleState};
use super::visibility::{is_visible, min_distance};

/// How the world's emergency brake interacts with a controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmergencyMode {
    /// First sighting of any pedestrian switches to emergency braking for the
    /// rest of the trial.
    Latch,
    /// Emergency braking while at least one pedestrian is visible.
    WhileVisible,
    /// Never override the controller.
    #[default]
    Off,
}

/// What a controller may look at when choosing an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub dt: f64,
    pub state: VehicleState,
    pub n_visible: usize,
}

/// A longitudinal control policy. Controller memory (integrators, timers,
/// logs) lives in the implementor and is confined to one trial.
pub trait Controller {
    fn emergency_mode(&self) -> EmergencyMode {
        EmergencyMode::Off
    }

    /// Requested acceleration (m/s²). The world clamps it to `u_bounds`.
    /// An error aborts the trial.
    fn control(&mut self, obs: &Observation) -> Result<f64>;
}

impl<C: Controller + ?Sized> Controller for &mut C {
    fn emergency_mode(&self) -> EmergencyMode {
        (**self).emergency_mode()
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        (**self).control(obs)
    }
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn emergency_mode(&self) -> EmergencyMode {
        (**self).emergency_mode()
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        (**self).control(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSetup {
    pub init: VehicleState,
    /// Trial ends (safe) once `t >= horizon`.
    pub horizon: f64,
    /// Seed of the pedestrian world.
    pub seed: u64,
    pub record: bool,
}

impl TrialSetup {
    pub fn new(init: VehicleState, horizon: f64, seed: u64) -> Self {
        Self { init, horizon, seed, record: false }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}

/// One row per simulation step, taken after the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub n_visible: usize,
    pub min_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub safe: bool,
    /// Time of termination: reaching `safe_dist`, collision, or the horizon.
    pub traveling_time: f64,
    pub min_distance: f64,
    pub collision_time: Option<f64>,
    /// First step at which the emergency brake overrode the controller.
    pub emergency_time: Option<f64>,
    pub reached_safe_dist: bool,
    pub final_state: VehicleState,
    pub trajectory: Vec<TrajectoryRow>,
}

impl TrialResult {
    pub fn safe_flag(&self) -> u8 {
        u8::from(self.safe)
    }
}

/// Simulates one trial.
///
/// Per step at time `t = k*dt`: arrivals due at `t` spawn, visibility is
/// evaluated, the controller (or the emergency brake) picks `u`, the ego and
/// the pedestrians advance to `t + dt`, and the collision and `safe_dist`
/// tests run on the new positions.
pub fn run_trial<C: Controller + ?Sized>(
    cfg: &ScenarioConfig,
    controller: &mut C,
    setup: &TrialSetup,
) -> Result<TrialResult> {
    cfg.validate()?;
    if !(setup.horizon > 0.0) {
        return Err(crate::Error::InvalidArgument(format!("trial horizon must be positive, got {}", setup.horizon)));
    }
    run_trial_unchecked(cfg, controller, setup)
}

/// [`run_trial`] without validating `cfg`; for hot loops that validated once.
pub(crate) fn run_trial_unchecked<C: Controller + ?Sized>(
    cfg: &ScenarioConfig,
    controller: &mut C,
    setup: &TrialSetup,
) -> Result<TrialResult> {
    let dt = cfg.dt;
    let mut rng = seed::rng(setup.seed);
    let mut stream = PedestrianStream::new(cfg, &mut rng)?;
    let mut state = VehicleState { p: setup.init.p, v: setup.init.v.max(0.0) };
    let mode = controller.emergency_mode();
    let n_steps = (setup.horizon / dt - 1e-9).ceil().max(0.0) as usize;

    let mut result = TrialResult {
        safe: true,
        traveling_time: 0.0,
        min_distance: f64::INFINITY,
        collision_time: None,
        emergency_time: None,
        reached_safe_dist: false,
        final_state: state,
        trajectory: Vec::new(),
    };
    if state.p >= cfg.safe_dist {
        result.reached_safe_dist = true;
        return Ok(result);
    }

    let mut latched = false;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        stream.spawn_due(t, cfg, &mut rng)?;
        let n_visible = stream.active().filter(|p| is_visible(&state, p, cfg)).count();
        let emergency = match mode {
            EmergencyMode::Latch => {
                latched |= n_visible > 0;
                latched
            }
            EmergencyMode::WhileVisible => n_visible > 0,
            EmergencyMode::Off => false,
        };
        let u = if emergency {
            result.emergency_time.get_or_insert(t);
            -cfg.emergency_decel
        } else {
            controller.control(&Observation { t, dt, state, n_visible })?
        };
        let u = cfg.clamp_u(u);
        state = step_vehicle(state, u, dt);
        stream.advance(dt, cfg);

        let t_next = (k + 1) as f64 * dt;
        let d = min_distance(&state, stream.active());
        result.min_distance = result.min_distance.min(d);
        if setup.record {
            result.trajectory.push(TrajectoryRow { t: t_next, p: state.p, v: state.v, u, n_visible, min_dist: d });
        }
        result.final_state = state;
        if d < cfg.d_min {
            result.safe = false;
            result.collision_time = Some(t_next);
            result.traveling_time = t_next;
            return Ok(result);
        }
        if state.p >= cfg.safe_dist {
            result.reached_safe_dist = true;
            result.traveling_time = t_next;
            return Ok(result);
        }
    }
    result.traveling_time = n_steps as f64 * dt;
    Ok(result)
}

/// Writes `t,p,v,u,n_visible,min_dist`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "p", "v", "u", "n_visible", "min_dist"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.p.to_string(),
            r.v.to_string(),
            r.u.to_string(),
            r.n_visible.to_string(),
            r.min_dist.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io("<trajectory csv>", e))?;
    Ok(())
}
