use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::control::DiagnosticsRow;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::risk::RiskTable;
use crate::seed;
use crate::sim::{self, TrialResult, TrialSetup, VehicleState};
use crate::stats::{paired_bootstrap, wilson95, PairedBootstrap};

use super::method::{build_controller, MethodConfig, MethodKind};
use super::spec::Setting;

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Everything a study needs besides the method and setting.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub methods: &'a MethodConfig,
    pub table: Option<&'a RiskTable>,
    pub t_end: f64,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub safe: bool,
    /// Time to termination, including time to collision for unsafe trials.
    pub time: f64,
    pub reached_safe_dist: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub x_init: f64,
    pub v_init: f64,
    pub safety: Option<f64>,
    pub p_safe: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// Mean over all trials, collided ones included.
    pub mean_t: f64,
    pub n_trials: usize,
    pub collisions: usize,
    /// Trials that hit `t_end` before reaching `safe_dist`.
    pub timeouts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub outcomes: Vec<TrialOutcome>,
}

impl Evaluation {
    pub fn times(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.time).collect()
    }
}

fn summarize(label: &str, setting: &Setting, outcomes: &[TrialOutcome]) -> EvalSummary {
    let n = outcomes.len();
    let k = outcomes.iter().filter(|o| o.safe).count();
    let w = wilson95(k as u64, n as u64);
    EvalSummary {
        method: label.to_string(),
        x_init: setting.x_init,
        v_init: setting.v_init,
        safety: setting.safety,
        p_safe: k as f64 / n as f64,
        wilson_lo: w.lo,
        wilson_hi: w.hi,
        mean_t: outcomes.iter().map(|o| o.time).sum::<f64>() / n as f64,
        n_trials: n,
        collisions: n - k,
        timeouts: outcomes.iter().filter(|o| o.safe && !o.reached_safe_dist).count(),
    }
}

fn run_one(
    ctx: &EvalContext<'_>,
    kind: MethodKind,
    setting: &Setting,
    world: u64,
    record: bool,
) -> Result<(TrialResult, Vec<DiagnosticsRow>)> {
    let mut c = build_controller(kind, ctx.cfg, ctx.methods, setting.safety, ctx.table, world, record)?;
    let mut setup = TrialSetup::new(VehicleState::new(setting.x_init, setting.v_init), ctx.t_end, world);
    if record {
        setup = setup.recording();
    }
    let r = sim::run_trial(ctx.cfg, &mut c, &setup)?;
    Ok((r, c.diagnostics().to_vec()))
}

fn check_context(ctx: &EvalContext<'_>, kind: MethodKind, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if !(ctx.t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", ctx.t_end)));
    }
    ctx.cfg.validate()?;
    if kind.needs_table(&ctx.methods.safe) {
        match ctx.table {
            None => return Err(Error::MissingTable { method: kind.id().to_string() }),
            Some(t) => {
                t.warn_if_mismatched(ctx.cfg, "in use");
            }
        }
    }
    Ok(())
}

fn evaluate_labeled(
    ctx: &EvalContext<'_>,
    kind: MethodKind,
    label: &str,
    setting: &Setting,
    n: usize,
    root: u64,
) -> Result<Evaluation> {
    check_context(ctx, kind, n)?;
    let outcomes = ctx.exec.try_map(n, |i| {
        let (r, _) = run_one(ctx, kind, setting, seed::eval_seed(root, i as u64), false)?;
        Ok::<_, Error>(TrialOutcome { safe: r.safe, time: r.traveling_time, reached_safe_dist: r.reached_safe_dist })
    })?;
    Ok(Evaluation { summary: summarize(label, setting, &outcomes), outcomes })
}

/// Runs `n` seeded trials of `kind` from `setting`.
pub fn evaluate(ctx: &EvalContext<'_>, kind: MethodKind, setting: &Setting, n: usize, root: u64) -> Result<Evaluation> {
    evaluate_labeled(ctx, kind, kind.id(), setting, n, root)
}

/// A single recorded rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub result: TrialResult,
    /// Safe-controller diagnostics; empty for other methods.
    pub diagnostics: Vec<DiagnosticsRow>,
}

/// Records trial 0 of the world family `root`, i.e. the first trial that
/// [`evaluate`] with the same root would run.
pub fn simulate(ctx: &EvalContext<'_>, kind: MethodKind, setting: &Setting, root: u64) -> Result<Rollout> {
    check_context(ctx, kind, 1)?;
    let (result, diagnostics) = run_one(ctx, kind, setting, seed::eval_seed(root, 0), true)?;
    Ok(Rollout { result, diagnostics })
}

/// One-sided paired bootstrap of `mean_t(a) < mean_t(b)` over shared worlds.
pub fn compare_times(a: &Evaluation, b: &Evaluation, root: u64) -> PairedBootstrap {
    paired_bootstrap(&a.times(), &b.times(), BOOTSTRAP_RESAMPLES, root)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: String,
    pub mean_p_safe: f64,
    /// Mean over settings of `mean_t / max over methods of mean_t`.
    pub mean_norm_time: f64,
}

/// Safety-efficiency trade-off: each method's average safety and average
/// fraction of the slowest method's time, over all settings.
pub fn tradeoff_sweep(
    ctx: &EvalContext<'_>,
    methods: &[MethodKind],
    settings: &[Setting],
    n: usize,
    root: u64,
) -> Result<(Vec<SweepPoint>, Vec<Evaluation>)> {
    if methods.is_empty() || settings.is_empty() {
        return Err(Error::InvalidArgument("a sweep needs at least one method and one setting".into()));
    }
    let mut evals = Vec::with_capacity(methods.len() * settings.len());
    for s in settings {
        for m in methods {
            evals.push(evaluate(ctx, *m, s, n, root)?);
        }
    }
    let k = methods.len();
    let points = methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let mut p = 0.0;
            let mut t = 0.0;
            for row in evals.chunks(k) {
                let max = row.iter().map(|e| e.summary.mean_t).fold(0.0, f64::max);
                p += row[j].summary.p_safe;
                t += if max > 0.0 { row[j].summary.mean_t / max } else { 1.0 };
            }
            let ns = settings.len() as f64;
            SweepPoint { method: m.id().to_string(), mean_p_safe: p / ns, mean_norm_time: t / ns }
        })
        .collect();
    Ok((points, evals))
}

/// The safe controller at one setting for each α slope η.
pub fn alpha_ablation(
    ctx: &EvalContext<'_>,
    etas: &[f64],
    setting: &Setting,
    n: usize,
    root: u64,
) -> Result<Vec<(f64, Evaluation)>> {
    etas.iter()
        .map(|&eta| {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
            }
            let mut methods = *ctx.methods;
            methods.safe.eta = eta;
            let sub = EvalContext { methods: &methods, ..*ctx };
            let label = format!("proposed(eta={eta})");
            evaluate_labeled(&sub, MethodKind::Proposed, &label, setting, n, root).map(|e| (eta, e))
        })
        .collect()
}

/// One arm of the distribution ablation: the scenario with its arrivals and
/// the table built for exactly that scenario.
pub struct DistributionCase<'a> {
    pub name: String,
    pub cfg: ScenarioConfig,
    pub table: &'a RiskTable,
    pub table_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRun {
    pub name: String,
    pub evaluation: Evaluation,
    /// Trial 0, recorded with diagnostics.
    pub trace: Rollout,
}

/// The safe controller under several arrival distributions.
pub fn distribution_ablation(
    cases: &[DistributionCase<'_>],
    methods: &MethodConfig,
    setting: &Setting,
    n: usize,
    root: u64,
    t_end: f64,
    exec: Exec,
) -> Result<Vec<DistributionRun>> {
    cases
        .iter()
        .map(|case| {
            case.table.ensure_matches(&case.cfg, &case.table_path)?;
            let ctx = EvalContext { cfg: &case.cfg, methods, table: Some(case.table), t_end, exec };
            let label = format!("proposed[{}]", case.name);
            let evaluation = evaluate_labeled(&ctx, MethodKind::Proposed, &label, setting, n, root)?;
            let trace = simulate(&ctx, MethodKind::Proposed, setting, root)?;
            Ok(DistributionRun { name: case.name.clone(), evaluation, trace })
        })
        .collect()
}

/// `method,x_init,v_init,safety,p_safe,wilson_lo,wilson_hi,mean_t,n_trials,collisions,timeouts`
pub fn write_summaries_csv<W: Write>(rows: &[EvalSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<summary csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::TableMeta;

    fn flat_table(cfg: &ScenarioConfig, value: f64) -> RiskTable {
        let meta = TableMeta { n_trials: 1, horizon: 10.0, root_seed: 0, fingerprint: cfg.fingerprint(), dt: cfg.dt };
        let p: Vec<f64> = (0..=90).map(|i| -180.0 + 2.0 * i as f64).collect();
        let v: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        RiskTable::from_fn(p, v, meta, |_, _| value).unwrap()
    }

    #[test]
    fn empty_world_is_always_safe() {
        let cfg = ScenarioConfig::default().without_pedestrians();
        let table = flat_table(&cfg, 1.0);
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: Some(&table), t_end: 120.0, exec: Exec::Parallel };
        for m in MethodKind::STUDIED {
            let e = evaluate(&ctx, m, &Setting::new(-120.0, 6.0, 0.95), 5, 1).unwrap();
            assert_eq!(e.summary.p_safe, 1.0);
            assert_eq!(e.summary.timeouts, 0);
        }
    }

    #[test]
    fn single_trial_wilson_is_defined() {
        let cfg = ScenarioConfig::default();
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Sequential };
        let e = evaluate(&ctx, MethodKind::Pid, &Setting::new(-60.0, 2.0, 0.9), 1, 4).unwrap();
        let s = &e.summary;
        assert!(s.p_safe == 0.0 || s.p_safe == 1.0);
        assert!(0.0 <= s.wilson_lo && s.wilson_lo <= s.p_safe && s.p_safe <= s.wilson_hi && s.wilson_hi <= 1.0);
    }

    #[test]
    fn missing_table_is_reported() {
        let cfg = ScenarioConfig::default();
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Sequential };
        let err = evaluate(&ctx, MethodKind::Proposed, &Setting::new(-60.0, 2.0, 0.9), 3, 0).unwrap_err();
        assert!(err.to_string().contains("build-table"), "{err}");
    }

    #[test]
    fn reproducible_and_exec_independent() {
        let cfg = ScenarioConfig::default();
        let table = flat_table(&cfg, 0.97);
        let methods = MethodConfig::default();
        let mut ctx =
            EvalContext { cfg: &cfg, methods: &methods, table: Some(&table), t_end: 60.0, exec: Exec::Sequential };
        let s = Setting::new(-60.0, 2.0, 0.9);
        let a = evaluate(&ctx, MethodKind::WorstCase, &s, 20, 9).unwrap();
        ctx.exec = Exec::Workers(3);
        let b = evaluate(&ctx, MethodKind::WorstCase, &s, 20, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_with_one_method_normalises_to_one() {
        let cfg = ScenarioConfig::default();
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Parallel };
        let (points, evals) = tradeoff_sweep(&ctx, &[MethodKind::Pid], &[Setting::new(-60.0, 2.0, 0.9)], 5, 0).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].mean_norm_time, 1.0);
        assert_eq!(points[0].mean_p_safe, evals[0].summary.p_safe);
    }

    #[test]
    fn identical_methods_give_identical_points() {
        let cfg = ScenarioConfig::default();
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: None, t_end: 60.0, exec: Exec::Parallel };
        let settings = [Setting::new(-60.0, 2.0, 0.9), Setting::new(-30.0, 4.0, 0.9)];
        let (points, _) = tradeoff_sweep(&ctx, &[MethodKind::Pid, MethodKind::Pid], &settings, 8, 2).unwrap();
        assert_eq!(points[0], points[1]);
    }

    #[test]
    fn alpha_ablation_rejects_zero_eta() {
        let cfg = ScenarioConfig::default();
        let table = flat_table(&cfg, 1.0);
        let methods = MethodConfig::default();
        let ctx = EvalContext { cfg: &cfg, methods: &methods, table: Some(&table), t_end: 60.0, exec: Exec::Parallel };
        let s = Setting::new(-120.0, 0.0, 0.9);
        assert!(alpha_ablation(&ctx, &[0.0], &s, 2, 0).is_err());
        let rows = alpha_ablation(&ctx, &[0.05, 1.0], &s, 2, 0).unwrap();
        assert_eq!(rows[1].1.summary.method, "proposed(eta=1)");
    }

    #[test]
    fn distribution_ablation_checks_fingerprints() {
        let a = ScenarioConfig::default();
        let b = a.clone().without_pedestrians();
        let table = flat_table(&a, 1.0);
        let case = DistributionCase { name: "none".into(), cfg: b, table: &table, table_path: "a.json".into() };
        let err = distribution_ablation(
            &[case],
            &MethodConfig::default(),
            &Setting::new(-60.0, 2.0, 0.9),
            2,
            0,
            60.0,
            Exec::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch { .. }));
    }

    #[test]
    fn summary_csv_columns() {
        let s = summarize(
            "pid",
            &Setting::new(-60.0, 2.0, 0.9),
            &[TrialOutcome { safe: true, time: 3.0, reached_safe_dist: true }],
        );
        let mut buf = Vec::new();
        write_summaries_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "method,x_init,v_init,safety,p_safe,wilson_lo,wilson_hi,mean_t,n_trials,collisions,timeouts\n"
        ));
    }
}
