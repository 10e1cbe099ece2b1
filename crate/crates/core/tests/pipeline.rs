//! End-to-end paths through the library: scenario -> table -> controllers ->
//! studies.

use occsafe::control::{nominal_cruise, RiskMode, SafeControllerParams};
use occsafe::harness::{
    distribution_ablation, distribution_preset, evaluate, simulate, tradeoff_sweep, DistributionCase, EvalContext,
    MethodConfig, MethodKind, Setting,
};
use occsafe::risk::{build_risk_table, estimate_safety_probability, GridSpec, RiskTable};
use occsafe::sim::{run_trial, Controller, EmergencyMode, Observation, TrialSetup, VehicleState};
use occsafe::{Exec, ScenarioConfig, SpawnDistribution};

struct Cruise(f64);

impl Controller for Cruise {
    fn emergency_mode(&self) -> EmergencyMode {
        EmergencyMode::Latch
    }

    fn control(&mut self, obs: &Observation) -> occsafe::Result<f64> {
        Ok(nominal_cruise(obs.state.v, self.0, 1.0, [-6.0, 3.0]))
    }
}

fn small_grid() -> GridSpec {
    GridSpec { p_min: -140.0, p_max: 0.0, dp: 4.0, v_min: 0.0, v_max: 10.0, dv: 1.0 }
}

#[test]
fn unobstructed_cruise_time() {
    let cfg = ScenarioConfig::default().without_pedestrians();
    let setup = TrialSetup::new(VehicleState::new(-120.0, 5.0), 200.0, 1);
    let r = run_trial(&cfg, &mut Cruise(5.0), &setup).unwrap();
    assert!(r.safe && r.reached_safe_dist);
    assert!((r.traveling_time - 125.0 / 5.0).abs() <= cfg.dt + 1e-9, "{}", r.traveling_time);
}

#[test]
fn early_pedestrian_beats_emergency_brake() {
    // Spawns 1 m from the lane, right in front of a fast ego.
    let cfg = ScenarioConfig {
        first_spawn: SpawnDistribution::fixed(0.0),
        ped_spawn_point: [0.0, 1.0],
        ..ScenarioConfig::default()
    };
    let setup = TrialSetup::new(VehicleState::new(-1.0, 10.0), 10.0, 3);
    let r = run_trial(&cfg, &mut Cruise(10.0), &setup).unwrap();
    assert!(!r.safe);
    assert!(r.collision_time.is_some());
}

#[test]
fn table_round_trip_feeds_evaluation() {
    let cfg = ScenarioConfig::default();
    let (table, _) = build_risk_table(&cfg, &small_grid(), 40, 10.0, 9, Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    table.save(&path).unwrap();
    let loaded = RiskTable::load(&path).unwrap();
    assert_eq!(loaded, table);
    loaded.ensure_matches(&cfg, &path).unwrap();

    let methods = MethodConfig::default();
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: Some(&loaded), t_end: 60.0, exec: Exec::Parallel };
    let s = Setting::new(-60.0, 2.0, 0.9);
    let a = evaluate(&ctx, MethodKind::Proposed, &s, 30, 4).unwrap();
    let b = evaluate(&EvalContext { exec: Exec::Sequential, ..ctx }, MethodKind::Proposed, &s, 30, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary.n_trials, 30);
    assert!(a.summary.wilson_lo <= a.summary.p_safe && a.summary.p_safe <= a.summary.wilson_hi);
}

#[test]
fn table_cell_equals_point_estimate() {
    let cfg = ScenarioConfig::default();
    let (table, _) = build_risk_table(&cfg, &GridSpec::point(-20.0, 6.0), 200, 20.0, 13, Exec::Parallel).unwrap();
    let e = estimate_safety_probability(&cfg, 20.0, -20.0, 6.0, 200, 13).unwrap();
    assert_eq!(table.values(), [e.psi]);
}

#[test]
fn no_arrivals_means_pure_cruise() {
    let (first, subsequent) = distribution_preset(3).unwrap();
    let cfg = ScenarioConfig { first_spawn: first, subsequent_spawn: subsequent, ..ScenarioConfig::default() };
    let (table, _) = build_risk_table(&cfg, &small_grid(), 5, 10.0, 1, Exec::Parallel).unwrap();
    assert!(table.values().iter().all(|&p| p == 1.0));

    let methods = MethodConfig::default();
    let cases =
        [DistributionCase { name: "none".into(), cfg: cfg.clone(), table: &table, table_path: "none.json".into() }];
    let runs =
        distribution_ablation(&cases, &methods, &Setting::new(-120.0, 0.0, 0.9), 5, 2, 120.0, Exec::Parallel).unwrap();
    let trace = &runs[0].trace;
    assert_eq!(runs[0].evaluation.summary.p_safe, 1.0);
    for d in &trace.diagnostics {
        assert_eq!(d.u_out, d.u_nom);
        assert_eq!(d.active, 0);
    }
    let mut v = 0.0;
    for row in &trace.result.trajectory {
        let u = nominal_cruise(v, cfg.v_target, cfg.cruise_gain, cfg.u_bounds);
        assert_eq!(row.u, u);
        v = row.v;
    }
}

#[test]
fn distribution_ablation_rejects_foreign_table() {
    let cfg = ScenarioConfig::default();
    let (table, _) = build_risk_table(&cfg, &small_grid(), 5, 10.0, 1, Exec::Parallel).unwrap();
    let (first, subsequent) = distribution_preset(2).unwrap();
    let mut other = cfg.clone();
    other.first_spawn = first;
    other.subsequent_spawn = subsequent;
    let cases = [DistributionCase { name: "d2".into(), cfg: other, table: &table, table_path: "d1.json".into() }];
    let err = distribution_ablation(
        &cases,
        &MethodConfig::default(),
        &Setting::new(-120.0, 0.0, 0.9),
        2,
        0,
        60.0,
        Exec::Sequential,
    )
    .unwrap_err();
    assert!(matches!(err, occsafe::Error::FingerprintMismatch { .. }), "{err}");
}

#[test]
fn missing_table_is_reported() {
    let cfg = ScenarioConfig::default();
    let methods = MethodConfig::default();
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 30.0, exec: Exec::Sequential };
    let err = evaluate(&ctx, MethodKind::Proposed, &Setting::new(-60.0, 2.0, 0.9), 1, 0).unwrap_err();
    assert!(err.to_string().contains("build-table"), "{err}");
    evaluate(&ctx, MethodKind::Pid, &Setting::new(-60.0, 2.0, 0.9), 1, 0).unwrap();
}

#[test]
fn online_mode_runs_without_table() {
    let cfg = ScenarioConfig::default();
    let methods = MethodConfig {
        safe: SafeControllerParams { mode: RiskMode::Online, n_online: 10, ..SafeControllerParams::default() },
        ..MethodConfig::default()
    };
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 15.0, exec: Exec::Sequential };
    let r = simulate(&ctx, MethodKind::Proposed, &Setting::new(-40.0, 3.0, 0.9), 5).unwrap();
    assert!(!r.diagnostics.is_empty());
    assert!(r.diagnostics.iter().all(|d| d.psi.is_some_and(|p| (0.0..=1.0).contains(&p))));
}

#[test]
fn sweep_with_one_method() {
    let cfg = ScenarioConfig::default();
    let methods = MethodConfig::default();
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Parallel };
    let settings = [Setting::new(-60.0, 2.0, 0.9), Setting::new(-120.0, 6.0, 0.95)];
    let (points, evals) = tradeoff_sweep(&ctx, &[MethodKind::Pid], &settings, 10, 1).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(evals.len(), 2);
    assert_eq!(points[0].mean_norm_time, 1.0);
}

#[test]
fn identical_methods_give_identical_points() {
    let cfg = ScenarioConfig::default();
    let methods = MethodConfig::default();
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Parallel };
    let settings = [Setting::new(-60.0, 2.0, 0.9)];
    let (points, _) = tradeoff_sweep(&ctx, &[MethodKind::Pid, MethodKind::Pid], &settings, 10, 1).unwrap();
    assert_eq!(points[0], points[1]);
}
