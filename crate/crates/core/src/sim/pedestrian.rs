use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{ScenarioConfig, SpawnDistribution};
use crate::error::{Error, Result};

/// A crossing agent walking along -y at constant speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pedestrian {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub active: bool,
}

/// Draws from `N(mean, std²)` conditioned on `[lower, upper]` by rejection.
///
/// A degenerate interval returns its single point without consuming
/// randomness; an interval at `+inf` therefore yields `inf` ("never").
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    dist: &SpawnDistribution,
    max_rejections: u32,
) -> Result<f64> {
    if dist.lower == dist.upper {
        return Ok(dist.lower);
    }
    for _ in 0..max_rejections {
        let z: f64 = rng.sample(StandardNormal);
        let x = dist.mean + dist.std * z;
        if x >= dist.lower && x <= dist.upper {
            return Ok(x);
        }
    }
    Err(Error::SamplingExhausted {
        attempts: max_rejections,
        mean: dist.mean,
        std: dist.std,
        lower: dist.lower,
        upper: dist.upper,
    })
}

// Spawn times are compared against step times computed as k*dt.
const SPAWN_EPS: f64 = 1e-9;

/// Pedestrians currently in the world plus the arrival schedule.
#[derive(Debug, Clone)]
pub struct PedestrianStream {
    peds: Vec<Pedestrian>,
    next_spawn: f64,
    next_id: u32,
}

impl PedestrianStream {
    /// Samples the first arrival time.
    pub fn new<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Self> {
        let next_spawn = sample_truncated_normal(rng, &cfg.first_spawn, cfg.max_rejections)?;
        Ok(Self { peds: Vec::new(), next_spawn, next_id: 0 })
    }

    pub fn next_spawn_time(&self) -> f64 {
        self.next_spawn
    }

    /// Places every pedestrian whose arrival time is `<= t` at the spawn point.
    pub fn spawn_due<R: Rng + ?Sized>(&mut self, t: f64, cfg: &ScenarioConfig, rng: &mut R) -> Result<()> {
        while self.next_spawn <= t + SPAWN_EPS {
            self.peds.push(Pedestrian {
                id: self.next_id,
                x: cfg.ped_spawn_point[0],
                y: cfg.ped_spawn_point[1],
                speed: cfg.ped_speed,
                active: true,
            });
            self.next_id += 1;
            let gap = sample_truncated_normal(rng, &cfg.subsequent_spawn, cfg.max_rejections)?;
            self.next_spawn += gap;
        }
        Ok(())
    }

    /// Moves active pedestrians by `-speed * dt` along y and retires those past
    /// the despawn line.
    pub fn advance(&mut self, dt: f64, cfg: &ScenarioConfig) {
        for ped in self.peds.iter_mut().filter(|p| p.active) {
            ped.y -= ped.speed * dt;
            if ped.y < cfg.ped_despawn_y {
                ped.active = false;
            }
        }
        // Retired pedestrians never come back.
        if self.peds.len() > 16 {
            self.peds.retain(|p| p.active);
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &Pedestrian> + Clone {
        self.peds.iter().filter(|p| p.active)
    }

    pub fn all(&self) -> &[Pedestrian] {
        &self.peds
    }
}

/// Spawns arrivals due at `t`, then advances everyone to `t + dt`.
pub fn spawn_and_step_pedestrians<R: Rng + ?Sized>(
    stream: &mut PedestrianStream,
    rng: &mut R,
    cfg: &ScenarioConfig,
    t: f64,
    dt: f64,
) -> Result<()> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    stream.spawn_due(t, cfg, rng)?;
    stream.advance(dt, cfg);
    Ok(())
}
