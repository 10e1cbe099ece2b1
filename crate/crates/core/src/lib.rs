//! Occluded pedestrian-crossing simulator with Monte Carlo safety-probability
//! estimation and a probabilistic-invariance safe controller.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`]: deterministic world (ego kinematics, pedestrian arrivals,
//!   occlusion, collisions) and single-trial rollouts.
//! * [`risk`]: Monte Carlo estimation of the long-term safety probability,
//!   gridded risk tables, interpolation and finite-difference gradients.
//! * [`control`]: nominal, PID, worst-case, planning-based and the
//!   probabilistic safe controller.
//! * [`harness`]: batch evaluation, trade-off sweeps and ablations.
//!
//! Batch work (trials, table cells) goes through [`exec::Exec`], which fans
//! out over rayon when the `parallel` feature is enabled and otherwise runs
//! sequentially. Results never depend on the execution mode.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod exec;
pub mod harness;
pub mod overrides;
pub mod risk;
pub mod seed;
pub mod sim;
pub mod stats;

pub use config::{ScenarioConfig, SpawnDistribution, VisibilityRule};
pub use error::{Error, Result};
pub use exec::Exec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
