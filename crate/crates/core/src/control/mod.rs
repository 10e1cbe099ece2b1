//! Longitudinal control policies.
//!
//! Every controller implements [`crate::sim::Controller`] and keeps its
//! memory (integrators, timers, phase, diagnostics) to itself, so one
//! instance serves exactly one trial.

mod nominal;
mod pid;
mod planning;
mod safe;
mod worst_case;

pub use nominal::{nominal_cruise, Cruise};
pub use pid::{pid_velocity, Pid, PidGains, PidState};
pub use planning::{required_decel, Planning, PlanningPhase, PlanningProfile};
pub use safe::{
    alpha, feasible_interval, safe_control_step, solve_safe_qp, synthesize_constraint, write_diagnostics_csv,
    ConstraintInstance, DiagnosticsRow, Relaxation, RiskMode, SafeController, SafeControllerParams, SafeStep,
};
pub use worst_case::{worst_case, WorstCase, WorstCaseTimer};

use crate::risk::RiskSource;

/// Ψ at `(p, v)`, or `None` when `p` lies beyond the far edge of a bounded
/// source. Past the crossing the ego is driving away from the risk.
pub(crate) fn psi_in_range<S: RiskSource + ?Sized>(source: &S, p: f64, v: f64) -> crate::Result<Option<f64>> {
    if source.bounded() && p > source.domain().p_max {
        return Ok(None);
    }
    source.psi(p, v).map(Some)
}
