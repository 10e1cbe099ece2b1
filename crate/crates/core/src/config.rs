//! Scenario configuration: geometry, pedestrian arrivals, physical constants.
//!
//! Files are TOML. Every field has a default, unknown keys are rejected, and
//! the canonical serialisation doubles as the input of the scenario
//! fingerprint stored in risk tables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis-aligned rectangle given by centre and half-extents (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
}

impl Rect {
    pub fn min(&self) -> [f64; 2] {
        [self.center[0] - self.half_extents[0], self.center[1] - self.half_extents[1]]
    }

    pub fn max(&self) -> [f64; 2] {
        [self.center[0] + self.half_extents[0], self.center[1] + self.half_extents[1]]
    }
}

/// Normal distribution truncated to `[lower, upper]`, sampled by rejection.
///
/// `lower == upper` is a point mass; setting both to `inf` disables the
/// arrival it describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnDistribution {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SpawnDistribution {
    pub const fn new(mean: f64, std: f64, lower: f64, upper: f64) -> Self {
        Self { mean, std, lower, upper }
    }

    /// A distribution that never fires.
    pub const fn never() -> Self {
        Self::new(0.0, 1.0, f64::INFINITY, f64::INFINITY)
    }

    /// A point mass at `at`.
    pub const fn fixed(at: f64) -> Self {
        Self::new(at, 1.0, at, at)
    }

    pub fn is_never(&self) -> bool {
        self.lower == f64::INFINITY
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{name}: {msg}")));
        if self.mean.is_nan() || self.std.is_nan() || self.lower.is_nan() || self.upper.is_nan() {
            return bad("NaN parameter");
        }
        if !(self.std > 0.0) || !self.std.is_finite() {
            return bad("std must be positive and finite");
        }
        if !self.mean.is_finite() {
            return bad("mean must be finite");
        }
        if self.lower > self.upper {
            return bad("lower bound exceeds upper bound");
        }
        if self.lower == f64::NEG_INFINITY && self.upper == f64::NEG_INFINITY {
            return bad("interval at -inf");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityRule {
    /// Box rule on ego position and pedestrian lateral offset.
    Rectangular,
    /// Segment from ego to pedestrian must not cross the occluder.
    LineOfSight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityConfig {
    pub rule: VisibilityRule,
    /// Rectangular rule: ego must satisfy `ego_p_min < p < ego_p_max`.
    pub ego_p_min: f64,
    pub ego_p_max: f64,
    /// Rectangular rule: pedestrian visible while `|y_ped - y_ego| < lateral_half_width`.
    pub lateral_half_width: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self { rule: VisibilityRule::Rectangular, ego_p_min: -10.0, ego_p_max: 0.0, lateral_half_width: 6.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Simulation step (s).
    pub dt: f64,
    /// Collision distance (m).
    pub d_min: f64,
    /// Ego position past which a trial counts as safe (m).
    pub safe_dist: f64,
    /// Cruise set-point used by the deployed nominal controllers (m/s).
    pub v_target: f64,
    /// Acceleration bounds `[u_min, u_max]` (m/s²).
    pub u_bounds: [f64; 2],
    /// Constant deceleration of the emergency brake (m/s², positive).
    pub emergency_decel: f64,
    /// Deceleration of the worst-case baseline's braking pulse (m/s², positive).
    pub worst_case_decel: f64,
    /// Length of the worst-case braking pulse (s).
    pub worst_case_pulse: f64,
    /// Proportional gain of the nominal cruise controller (1/s).
    pub cruise_gain: f64,
    /// Rejection budget of the truncated-normal sampler.
    pub max_rejections: u32,
    pub ped_spawn_point: [f64; 2],
    /// Crossing speed, along -y (m/s).
    pub ped_speed: f64,
    pub ped_despawn_y: f64,
    pub occluder: Rect,
    pub visibility: VisibilityConfig,
    pub first_spawn: SpawnDistribution,
    pub subsequent_spawn: SpawnDistribution,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            d_min: 2.0,
            safe_dist: 5.0,
            v_target: 5.0,
            u_bounds: [-6.0, 3.0],
            emergency_decel: 3.0,
            worst_case_decel: 6.0,
            worst_case_pulse: 0.25,
            cruise_gain: 1.0,
            max_rejections: 10_000,
            ped_spawn_point: [0.0, 13.0],
            ped_speed: 1.0,
            ped_despawn_y: -3.0,
            occluder: Rect { center: [-7.0, 5.0], half_extents: [2.5, 1.5] },
            visibility: VisibilityConfig::default(),
            first_spawn: SpawnDistribution::new(1.5, 2.5, 0.0, 10.0),
            subsequent_spawn: SpawnDistribution::new(6.0, 2.5, 0.0, 15.0),
        }
    }
}

impl ScenarioConfig {
    pub fn u_min(&self) -> f64 {
        self.u_bounds[0]
    }

    pub fn u_max(&self) -> f64 {
        self.u_bounds[1]
    }

    pub fn clamp_u(&self, u: f64) -> f64 {
        u.clamp(self.u_bounds[0], self.u_bounds[1])
    }

    /// Same scenario with pedestrian arrivals switched off.
    pub fn without_pedestrians(mut self) -> Self {
        self.first_spawn = SpawnDistribution::never();
        self.subsequent_spawn = SpawnDistribution::never();
        self
    }

    pub fn arrivals_disabled(&self) -> bool {
        self.first_spawn.is_never()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive")?;
        check(self.d_min > 0.0 && self.d_min.is_finite(), "d_min must be positive")?;
        check(self.safe_dist.is_finite(), "safe_dist must be finite")?;
        check(self.v_target >= 0.0 && self.v_target.is_finite(), "v_target must be non-negative")?;
        check(self.u_bounds[0] < 0.0 && 0.0 < self.u_bounds[1], "u_bounds must satisfy u_min < 0 < u_max")?;
        check(self.u_bounds.iter().all(|u| u.is_finite()), "u_bounds must be finite")?;
        check(self.emergency_decel > 0.0 && self.emergency_decel.is_finite(), "emergency_decel must be positive")?;
        check(self.worst_case_decel > 0.0 && self.worst_case_decel.is_finite(), "worst_case_decel must be positive")?;
        check(
            self.worst_case_pulse >= 0.0 && self.worst_case_pulse.is_finite(),
            "worst_case_pulse must be non-negative",
        )?;
        check(self.cruise_gain > 0.0 && self.cruise_gain.is_finite(), "cruise_gain must be positive")?;
        check(self.max_rejections > 0, "max_rejections must be positive")?;
        check(self.ped_speed >= 0.0 && self.ped_speed.is_finite(), "ped_speed must be non-negative")?;
        check(
            self.ped_spawn_point.iter().all(|c| c.is_finite()) && self.ped_despawn_y.is_finite(),
            "pedestrian geometry must be finite",
        )?;
        check(
            self.occluder.half_extents.iter().all(|h| *h >= 0.0)
                && self.occluder.center.iter().chain(self.occluder.half_extents.iter()).all(|c| c.is_finite()),
            "occluder must have finite centre and non-negative half-extents",
        )?;
        let vis = &self.visibility;
        check(vis.ego_p_min < vis.ego_p_max && vis.lateral_half_width > 0.0, "visibility window must be non-empty")?;
        self.first_spawn.validate("first_spawn")?;
        self.subsequent_spawn.validate("subsequent_spawn")?;
        check(self.subsequent_spawn.upper > 0.0, "subsequent_spawn must allow a positive gap")?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Parse { path: "<string>".into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serialises")
    }

    /// Stable hash of the canonical serialisation (first 16 bytes of SHA-256, hex).
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(&digest[..16])
    }
}
