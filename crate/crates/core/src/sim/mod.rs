//! Deterministic discrete-time world of the occluded crossing.

mod pedestrian;
pub(crate) mod trial;
mod vehicle;
mod visibility;

pub use pedestrian::{sample_truncated_normal, spawn_and_step_pedestrians, Pedestrian, PedestrianStream};
pub use trial::{
    run_trial, write_trajectory_csv, Controller, EmergencyMode, Observation, TrajectoryRow, TrialResult, TrialSetup,
};
pub use vehicle::{step_vehicle, VehicleState};
pub use visibility::{check_collision, is_visible, min_distance, segment_intersects_rect, visible_pedestrians};
