use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::risk::{gradient, GradientEstimate, RiskSource};
use crate::sim::{Controller, EmergencyMode, Observation, VehicleState};

use super::nominal::Cruise;
use super::psi_in_range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    /// Ψ and its gradient come from a precomputed table.
    #[default]
    Table,
    /// Ψ is estimated by fresh Monte Carlo rollouts at every probe.
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafeControllerParams {
    /// Risk tolerance ε; the target is Ψ ≥ 1 − ε.
    pub epsilon: f64,
    /// Slope of the class-K function α(h) = η·h.
    pub eta: f64,
    pub dx_probe: f64,
    pub dv_probe: f64,
    /// Trials per online probe.
    pub n_online: usize,
    /// Risk horizon of online probes (s).
    pub horizon: f64,
    pub mode: RiskMode,
}

impl Default for SafeControllerParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            eta: 0.2,
            dx_probe: 2.0,
            dv_probe: 0.5,
            n_online: 50,
            horizon: 10.0,
            mode: RiskMode::Table,
        }
    }
}

impl SafeControllerParams {
    pub fn with_target(mut self, safety: f64) -> Self {
        self.epsilon = 1.0 - safety;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.dx_probe > 0.0 && self.dv_probe > 0.0) {
            return bad("probe steps must be positive".into());
        }
        if self.mode == RiskMode::Online && (self.n_online == 0 || !(self.horizon > 0.0)) {
            return bad("online mode needs n_online >= 1 and a positive horizon".into());
        }
        Ok(())
    }
}

pub fn alpha(eta: f64, h: f64) -> f64 {
    eta * h
}

/// Half-line `a·u ≥ b` intersected with `u_bounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintInstance {
    pub a: f64,
    pub b: f64,
    pub u_bounds: [f64; 2],
}

/// Linearised invariance condition at the current state:
/// `dΨ/dv·u ≥ −α(Ψ − (1−ε)) − dΨ/dp·v`.
pub fn synthesize_constraint(
    psi: f64,
    grad: &GradientEstimate,
    v: f64,
    eta: f64,
    epsilon: f64,
    u_bounds: [f64; 2],
) -> Result<ConstraintInstance> {
    let inputs = [psi, grad.dpsi_dp, grad.dpsi_dv, v, eta, epsilon];
    if inputs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite constraint input {inputs:?}")));
    }
    Ok(ConstraintInstance { a: grad.dpsi_dv, b: -alpha(eta, psi - (1.0 - epsilon)) - grad.dpsi_dp * v, u_bounds })
}

/// Feasible set of `c` as a closed interval, or `None` when empty.
pub fn feasible_interval(c: &ConstraintInstance) -> Option<(f64, f64)> {
    let [lo, hi] = c.u_bounds;
    let (lo, hi) = if c.a > 0.0 {
        (lo.max(c.b / c.a), hi)
    } else if c.a < 0.0 {
        (lo, hi.min(c.b / c.a))
    } else if c.b <= 0.0 {
        (lo, hi)
    } else {
        return None;
    };
    (lo <= hi).then_some((lo, hi))
}

/// Minimiser of `(u − u_nominal)²` over the feasible interval.
pub fn solve_safe_qp(c: &ConstraintInstance, u_nominal: f64) -> Option<f64> {
    feasible_interval(c).map(|(lo, hi)| u_nominal.clamp(lo, hi))
}

/// Which relaxation produced the output of an active step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    None,
    /// η divided by 2^k, k = 1..=3.
    Eta(u8),
    /// ε doubled (with η/8).
    Epsilon,
    /// Nothing was feasible: maximum braking.
    Fallback,
}

impl Relaxation {
    pub fn code(&self) -> u8 {
        match self {
            Relaxation::None => 0,
            Relaxation::Eta(k) => *k,
            Relaxation::Epsilon => 4,
            Relaxation::Fallback => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeStep {
    pub u: f64,
    /// `None` past the far edge of a bounded risk source.
    pub psi: Option<f64>,
    pub grad: Option<GradientEstimate>,
    pub constraint: Option<ConstraintInstance>,
    pub active: bool,
    pub relaxation: Relaxation,
}

/// One step of the probabilistic safe controller.
///
/// Above the tolerance (Ψ > 1 − ε) the clamped nominal passes through.
/// Otherwise the invariance constraint is built from finite-difference
/// gradients and the nominal is projected onto it. An empty feasible set is
/// retried with η halved up to three times, then with ε doubled, and finally
/// answered with `u_min`.
pub fn safe_control_step<S: RiskSource + ?Sized>(
    state: VehicleState,
    source: &S,
    u_nominal: f64,
    params: &SafeControllerParams,
    u_bounds: [f64; 2],
) -> Result<SafeStep> {
    let nominal = u_nominal.clamp(u_bounds[0], u_bounds[1]);
    let passthrough =
        |psi| SafeStep { u: nominal, psi, grad: None, constraint: None, active: false, relaxation: Relaxation::None };
    let psi = match psi_in_range(source, state.p, state.v)? {
        None => return Ok(passthrough(None)),
        Some(psi) if psi > 1.0 - params.epsilon => return Ok(passthrough(Some(psi))),
        Some(psi) => psi,
    };
    let grad = gradient(source, state.p, state.v, params.dx_probe, params.dv_probe)?;
    let attempts = [
        (params.eta, params.epsilon, Relaxation::None),
        (params.eta / 2.0, params.epsilon, Relaxation::Eta(1)),
        (params.eta / 4.0, params.epsilon, Relaxation::Eta(2)),
        (params.eta / 8.0, params.epsilon, Relaxation::Eta(3)),
        (params.eta / 8.0, (2.0 * params.epsilon).min(1.0), Relaxation::Epsilon),
    ];
    let mut last = None;
    for (eta, eps, relaxation) in attempts {
        let c = synthesize_constraint(psi, &grad, state.v, eta, eps, u_bounds)?;
        last = Some(c);
        if let Some(u) = solve_safe_qp(&c, nominal) {
            if relaxation != Relaxation::None {
                log::debug!("safe controller relaxed ({relaxation:?}) at p={} v={}", state.p, state.v);
            }
            return Ok(SafeStep { u, psi: Some(psi), grad: Some(grad), constraint: Some(c), active: true, relaxation });
        }
    }
    log::debug!("safe controller infeasible at p={} v={}; braking fully", state.p, state.v);
    Ok(SafeStep {
        u: u_bounds[0],
        psi: Some(psi),
        grad: Some(grad),
        constraint: last,
        active: true,
        relaxation: Relaxation::Fallback,
    })
}

/// Per-step safe-controller record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub psi: Option<f64>,
    pub dpsi_dp: Option<f64>,
    pub dpsi_dv: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub u_nom: f64,
    pub u_out: f64,
    pub active: u8,
    pub relaxed: u8,
}

/// Writes `t,psi,dpsi_dp,dpsi_dv,a,b,u_nom,u_out,active,relaxed`; fields that
/// were not computed on a step are left empty.
pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["t", "psi", "dpsi_dp", "dpsi_dv", "a", "b", "u_nom", "u_out", "active", "relaxed"])?;
    }
    w.flush().map_err(|e| Error::io("<diagnostics csv>", e))?;
    Ok(())
}

/// Nominal cruise filtered through [`safe_control_step`].
pub struct SafeController<'a> {
    risk: Box<dyn RiskSource + 'a>,
    params: SafeControllerParams,
    cruise: Cruise,
    pub emergency: EmergencyMode,
    log: Option<Vec<DiagnosticsRow>>,
}

impl<'a> SafeController<'a> {
    pub fn new(cfg: &ScenarioConfig, params: SafeControllerParams, risk: Box<dyn RiskSource + 'a>) -> Result<Self> {
        params.validate()?;
        Ok(Self { risk, params, cruise: Cruise::from_config(cfg), emergency: EmergencyMode::Off, log: None })
    }

    /// Keep a [`DiagnosticsRow`] for every step the controller is asked for.
    pub fn with_diagnostics(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn diagnostics(&self) -> &[DiagnosticsRow] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_diagnostics(&mut self) -> Vec<DiagnosticsRow> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn params(&self) -> &SafeControllerParams {
        &self.params
    }
}

impl Controller for SafeController<'_> {
    fn emergency_mode(&self) -> EmergencyMode {
        self.emergency
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        let u_nom = self.cruise.u(obs.state.v);
        let step = safe_control_step(obs.state, &*self.risk, u_nom, &self.params, self.cruise.bounds)?;
        if let Some(log) = self.log.as_mut() {
            log.push(DiagnosticsRow {
                t: obs.t,
                psi: step.psi,
                dpsi_dp: step.grad.map(|g| g.dpsi_dp),
                dpsi_dv: step.grad.map(|g| g.dpsi_dv),
                a: step.constraint.map(|c| c.a),
                b: step.constraint.map(|c| c.b),
                u_nom,
                u_out: step.u,
                active: u8::from(step.active),
                relaxed: step.relaxation.code(),
            });
        }
        Ok(step.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{RiskTable, TableMeta};
    use crate::sim::{run_trial, TrialSetup};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const B: [f64; 2] = [-6.0, 3.0];

    fn grad(dp: f64, dv: f64) -> GradientEstimate {
        GradientEstimate { dpsi_dp: dp, dpsi_dv: dv, dx: 2.0, dv: 0.5 }
    }

    /// Dense scan of `[u_min, u_max]` at resolution `h` for the feasible point
    /// closest to `u_nom`.
    fn grid_oracle(c: &ConstraintInstance, u_nom: f64, h: f64) -> Option<f64> {
        let [lo, hi] = c.u_bounds;
        let n = ((hi - lo) / h).ceil() as usize;
        (0..=n)
            .map(|i| (lo + i as f64 * h).min(hi))
            .filter(|u| c.a * u >= c.b)
            .min_by(|x, y| (x - u_nom).abs().total_cmp(&(y - u_nom).abs()))
    }

    #[test]
    fn constraint_examples() {
        let c = synthesize_constraint(0.85, &grad(0.01, 0.02), 5.0, 0.2, 0.1, B).unwrap();
        assert_abs_diff_eq!(c.a, 0.02);
        // Independent re-evaluation: -η(Ψ-(1-ε)) - (dΨ/dp)v.
        let b = -(0.2 * (0.85 - 0.9)) - 0.01 * 5.0;
        assert_abs_diff_eq!(c.b, b, epsilon = 1e-15);
        assert_abs_diff_eq!(c.b, -0.04, epsilon = 1e-15);

        let c = synthesize_constraint(0.9, &grad(0.03, 0.0), 4.0, 0.5, 0.1, B).unwrap();
        assert_abs_diff_eq!(c.b, -0.12, epsilon = 1e-15);

        let c = synthesize_constraint(0.95, &grad(0.0, 0.0), 4.0, 0.5, 0.1, B).unwrap();
        assert!(c.b < 0.0);
        assert_eq!(feasible_interval(&c), Some((-6.0, 3.0)));

        assert!(synthesize_constraint(f64::NAN, &grad(0.0, 0.0), 1.0, 0.2, 0.1, B).is_err());
    }

    #[test]
    fn qp_examples() {
        let c = ConstraintInstance { a: 0.02, b: -0.04, u_bounds: B };
        assert_abs_diff_eq!(solve_safe_qp(&c, -3.0).unwrap(), -2.0, epsilon = 1e-12);
        assert_eq!(solve_safe_qp(&c, 1.0), Some(1.0));
        let c = ConstraintInstance { a: -0.01, b: 0.02, u_bounds: B };
        assert_abs_diff_eq!(solve_safe_qp(&c, 1.0).unwrap(), -2.0, epsilon = 1e-12);
        let c = ConstraintInstance { a: 0.0, b: 0.1, u_bounds: B };
        assert_eq!(solve_safe_qp(&c, 1.0), None);
        let c = ConstraintInstance { a: 0.01, b: 0.05, u_bounds: B };
        assert_eq!(solve_safe_qp(&c, 1.0), None);
    }

    #[test]
    fn qp_matches_grid_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..1000 {
            let lo = rng.random_range(-8.0..0.0);
            let hi = rng.random_range(0.0..5.0);
            let c = ConstraintInstance {
                a: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-1.0..1.0) },
                b: rng.random_range(-1.0..1.0),
                u_bounds: [lo, hi],
            };
            let u_nom = rng.random_range(-10.0..6.0);
            match (solve_safe_qp(&c, u_nom), grid_oracle(&c, u_nom, h)) {
                (Some(u), Some(g)) => {
                    assert!((u - g).abs() <= h + 1e-12, "{c:?} {u_nom}: {u} vs {g}");
                    assert!(c.a * u >= c.b - 1e-12);
                    assert!((lo..=hi).contains(&u));
                }
                (None, None) => {}
                // The feasible set may be thinner than the oracle's grid.
                (Some(u), None) => {
                    let (a, b) = feasible_interval(&c).unwrap();
                    assert!(b - a < h, "{c:?}: {u}");
                }
                (None, Some(g)) => panic!("closed form infeasible, oracle found {g} for {c:?}"),
            }
        }
    }

    #[test]
    fn alpha_contract() {
        for eta in [0.05, 0.1, 0.2, 0.5, 1.0] {
            let mut prev = 0.0;
            for i in 1..=1000 {
                let h = i as f64 * 0.013;
                let a = alpha(eta, h);
                assert!(a > prev && a <= h);
                assert_abs_diff_eq!(alpha(eta, 2.0 * h), 2.0 * a, epsilon = 1e-12);
                prev = a;
            }
        }
        let mut p = SafeControllerParams::default();
        for eta in [0.0, -0.1, 1.5, f64::NAN] {
            p.eta = eta;
            assert!(p.validate().is_err());
        }
        p.eta = 1.0;
        assert!(p.validate().is_ok());
        p.epsilon = 1.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn nominal_passthrough(a in -1.0..1.0f64, b in -1.0..1.0f64, u in -6.0..3.0f64) {
            let c = ConstraintInstance { a, b, u_bounds: B };
            if a * u >= b {
                prop_assert_eq!(solve_safe_qp(&c, u), Some(u));
            }
        }

        #[test]
        fn tightening_never_helps(a in 0.001..1.0f64, b1 in -1.0..1.0f64, db in 0.0..1.0f64, u in -8.0..5.0f64) {
            let c1 = ConstraintInstance { a, b: b1, u_bounds: B };
            let c2 = ConstraintInstance { a, b: b1 + db, u_bounds: B };
            if let (Some(x1), Some(x2)) = (solve_safe_qp(&c1, u), solve_safe_qp(&c2, u)) {
                prop_assert!((x2 - u).abs() >= (x1 - u).abs() - 1e-12);
            }
        }

        #[test]
        fn feasible_output_satisfies_constraint(a in -1.0..1.0f64, b in -1.0..1.0f64, u in -10.0..10.0f64) {
            let c = ConstraintInstance { a, b, u_bounds: B };
            if let Some(x) = solve_safe_qp(&c, u) {
                prop_assert!(a * x >= b - 1e-12);
                prop_assert!((B[0]..=B[1]).contains(&x));
            }
        }
    }

    fn meta() -> TableMeta {
        TableMeta { n_trials: 1, horizon: 10.0, root_seed: 0, fingerprint: String::new(), dt: 0.05 }
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn safe_region_is_pure_nominal() {
        let cfg = ScenarioConfig::default().without_pedestrians();
        let t = RiskTable::from_fn(axis(-200.0, 0.0, 2.0), axis(0.0, 10.0, 0.5), meta(), |_, _| 1.0).unwrap();
        let setup = TrialSetup::new(VehicleState::new(-120.0, 0.0), 120.0, 5).recording();
        let mut safe =
            SafeController::new(&cfg, SafeControllerParams::default(), Box::new(&t)).unwrap().with_diagnostics();
        let a = run_trial(&cfg, &mut safe, &setup).unwrap();
        let b = run_trial(&cfg, &mut Cruise::from_config(&cfg), &setup).unwrap();
        assert_eq!(a, b);
        assert!(safe.diagnostics().iter().all(|d| d.active == 0 && d.u_out == d.u_nom));
    }

    #[test]
    fn flat_violated_field_falls_back_to_braking() {
        let t = RiskTable::from_fn(axis(-20.0, 0.0, 2.0), axis(0.0, 10.0, 0.5), meta(), |_, _| 0.5).unwrap();
        let step =
            safe_control_step(VehicleState::new(-10.0, 4.0), &t, 1.0, &SafeControllerParams::default(), B).unwrap();
        assert!(step.active);
        assert_eq!(step.relaxation, Relaxation::Fallback);
        assert_eq!(step.u, B[0]);
    }

    #[test]
    fn relaxation_sequence() {
        // Ψ rises with speed (a = 0.01 > 0) and u ≥ b/a must fit under u_max = 3.
        let params = SafeControllerParams { eta: 1.0, ..Default::default() };
        let state = VehicleState::new(-10.0, 4.0);
        // Ψ = 0.86: b = 0.04η, so u ≥ 4η needs one halving.
        let t =
            RiskTable::from_fn(axis(-20.0, 0.0, 2.0), axis(0.0, 10.0, 0.5), meta(), |_, v| 0.82 + 0.01 * v).unwrap();
        let step = safe_control_step(state, &t, 0.0, &params, B).unwrap();
        assert_eq!(step.relaxation, Relaxation::Eta(1));
        assert_abs_diff_eq!(step.u, 2.0, epsilon = 1e-9);
        // Ψ = 0.64: u ≥ 26η fails for every η/2^k; with ε doubled b = (0.8-0.64)/8.
        let t = RiskTable::from_fn(axis(-20.0, 0.0, 2.0), axis(0.0, 10.0, 0.5), meta(), |_, v| 0.6 + 0.01 * v).unwrap();
        let step = safe_control_step(state, &t, 0.0, &params, B).unwrap();
        assert_eq!(step.relaxation, Relaxation::Epsilon);
        assert_abs_diff_eq!(step.u, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn level_set_tracking() {
        // Smooth synthetic field falling towards the crossing and with speed.
        let field = |p: f64, v: f64| 1.0 / (1.0 + (-(-0.08 * p - 0.6 * v + 1.0)).exp());
        let t = RiskTable::from_fn(axis(-200.0, 0.0, 0.5), axis(0.0, 10.0, 0.1), meta(), field).unwrap();
        let cfg = ScenarioConfig::default().without_pedestrians();
        let params = SafeControllerParams::default();
        let target = 1.0 - params.epsilon;
        let setup = TrialSetup::new(VehicleState::new(-100.0, 6.0), 20.0, 0).recording();
        let mut c = SafeController::new(&cfg, params, Box::new(&t)).unwrap().with_diagnostics();
        let r = run_trial(&cfg, &mut c, &setup).unwrap();
        assert!(c.diagnostics().iter().any(|d| d.active == 1));
        for row in r.trajectory.iter().filter(|row| row.p < 0.0) {
            let psi = t.lookup(row.p, row.v).psi;
            assert!(psi >= target - 0.02, "Ψ({}, {}) = {psi}", row.p, row.v);
        }
    }

    #[test]
    fn diagnostics_csv_header() {
        let mut buf = Vec::new();
        write_diagnostics_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "t,psi,dpsi_dp,dpsi_dv,a,b,u_nom,u_out,active,relaxed");
        let row = DiagnosticsRow {
            t: 0.0,
            psi: Some(1.0),
            dpsi_dp: None,
            dpsi_dv: None,
            a: None,
            b: None,
            u_nom: 1.0,
            u_out: 1.0,
            active: 0,
            relaxed: 0,
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.starts_with("t,psi,dpsi_dp,dpsi_dv,a,b,u_nom,u_out,active,relaxed\n0.0,1.0,,,,,1.0,1.0,0,0"),
            "{text}"
        );
    }
}
