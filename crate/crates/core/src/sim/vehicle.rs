use serde::{Deserialize, Serialize};

/// Ego longitudinal state. The lane is fixed at lateral coordinate 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Position along the travel axis (m).
    pub p: f64,
    /// Speed (m/s), never negative.
    pub v: f64,
}

impl VehicleState {
    pub const fn new(p: f64, v: f64) -> Self {
        Self { p, v }
    }

    pub fn step(self, u: f64, dt: f64) -> Self {
        step_vehicle(self, u, dt)
    }
}

/// One implicit-Euler step: the speed is updated first and the position
/// advances with the new speed. Speed is floored at zero (no reversing).
#[inline]
pub fn step_vehicle(state: VehicleState, u: f64, dt: f64) -> VehicleState {
    let v = (state.v + u * dt).max(0.0);
    VehicleState { p: state.p + v * dt, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_acceleration() {
        let s = step_vehicle(VehicleState::new(0.0, 2.0), 0.0, 0.05);
        assert_abs_diff_eq!(s.p, 0.1, epsilon = 1e-12);
        assert_eq!(s.v, 2.0);
    }

    #[test]
    fn position_uses_next_speed() {
        let s = step_vehicle(VehicleState::new(-120.0, 0.0), 2.0, 0.05);
        assert_abs_diff_eq!(s.v, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p, -119.995, epsilon = 1e-12);
    }

    #[test]
    fn speed_floor() {
        let s = step_vehicle(VehicleState::new(0.0, 0.1), -10.0, 0.05);
        assert_eq!(s, VehicleState::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn monotone_and_nonnegative(p in -200.0..10.0f64, v in 0.0..20.0f64, u in -10.0..10.0f64, dt in 0.001..0.5f64) {
            let s = step_vehicle(VehicleState::new(p, v), u, dt);
            prop_assert!(s.v >= 0.0);
            prop_assert!(s.p >= p);
        }
    }
}
