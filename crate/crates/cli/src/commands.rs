use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use occsafe::control::{write_diagnostics_csv, RiskMode};
use occsafe::harness::checks::{self, Check};
use occsafe::harness::{
    alpha_ablation, distribution_ablation, evaluate as run_evaluate, simulate as run_simulate, tradeoff_sweep,
    write_summaries_csv, DistributionCase, EvalContext, EvalSummary, Evaluation, ExperimentSpec, MethodConfig,
    MethodKind, Setting,
};
use occsafe::overrides;
use occsafe::risk::{build_risk_table, GridSpec, RiskTable};
use occsafe::sim::write_trajectory_csv;
use occsafe::{Exec, ScenarioConfig};

use crate::args::{AblateArgs, BuildTableArgs, Cli, EvaluateArgs, ScenarioArgs, SimulateArgs, StudyArgs};
use crate::output::{Manifest, OutDir, TableRef};
use crate::Outcome;

/// Loads the scenario and applies `--set` overrides, so fingerprints always
/// describe the overridden config.
fn scenario(a: &ScenarioArgs) -> Result<ScenarioConfig> {
    let base = match &a.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let ovs = overrides::parse_all(&a.overrides)?;
    let cfg = overrides::apply(&base, &ovs)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_table(path: &Path) -> Result<RiskTable> {
    Ok(RiskTable::load(path)?)
}

fn parse_setting(s: &str) -> Result<Setting> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().with_context(|| format!("setting `{s}`: `{x}` is not a number"));
    let setting = match parts.as_slice() {
        [x, v] => Setting { x_init: num(x)?, v_init: num(v)?, safety: None },
        [x, v, p] => Setting::new(num(x)?, num(v)?, num(p)?),
        _ => bail!("setting `{s}` must be `x_init,v_init[,safety]`"),
    };
    setting.validate()?;
    Ok(setting)
}

/// Distribution names become part of file names.
fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn exec(cli: &Cli) -> Exec {
    Exec::from_workers(cli.workers)
}

fn report_checks(checks: &[Check]) -> Outcome {
    for c in checks {
        println!("{}", c.line());
    }
    if checks::all_passed(checks) {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    }
}

pub fn build_table(cli: &Cli, a: &BuildTableArgs, argv: &[String]) -> Result<Outcome> {
    let cfg = scenario(&a.scenario)?;
    let grid = GridSpec { p_min: a.p_min, p_max: a.p_max, dp: a.dp, v_min: a.v_min, v_max: a.v_max, dv: a.dv };
    let mut out = OutDir::create(&a.out)?;
    let started = Instant::now();
    let (table, report) = build_risk_table(&cfg, &grid, a.trials, a.horizon, a.seed, exec(cli))?;
    log::info!("built {} cells in {:.2?}", report.cells, started.elapsed());
    if report.cells_past_safe_dist > 0 {
        log::warn!("{} cells start past safe_dist, where the risk is trivially zero", report.cells_past_safe_dist);
    }

    table.save(&out.path("risk_table.json"))?;
    out.register("risk_table.json");
    out.write_with("risk_table.csv", |w| Ok(table.write_csv(w)?))?;

    let meta = &table.meta;
    println!(
        "risk table: {} x {} cells, N={} per cell, T={} s, seed={}, fingerprint={}",
        table.p_axis().len(),
        table.v_axis().len(),
        meta.n_trials,
        meta.horizon,
        meta.root_seed,
        meta.fingerprint
    );
    let mut m = Manifest::new("build-table", argv, a.seed, cli.workers, &cfg);
    m.overrides = a.scenario.overrides.clone();
    m.tables.push(TableRef { path: out.path("risk_table.json"), meta: meta.clone() });
    out.finish(m)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    method: &'a str,
    setting: Setting,
    safe: bool,
    traveling_time: f64,
    min_distance: f64,
    collision_time: Option<f64>,
    emergency_time: Option<f64>,
    reached_safe_dist: bool,
    steps: usize,
}

pub fn simulate(cli: &Cli, a: &SimulateArgs, argv: &[String]) -> Result<Outcome> {
    let cfg = scenario(&a.scenario)?;
    let kind = MethodKind::parse(&a.method)?;
    let mut methods = MethodConfig::default();
    if let Some(eta) = a.eta {
        methods.safe.eta = eta;
    }
    if a.online {
        methods.safe.mode = RiskMode::Online;
    }
    methods.safe.with_target(a.safety).validate()?;
    let setting = Setting::new(a.x_init, a.v_init, a.safety);
    setting.validate()?;
    let table = a.table.as_deref().map(load_table).transpose()?;
    let ctx = EvalContext { cfg: &cfg, methods: &methods, table: table.as_ref(), t_end: a.t_end, exec: exec(cli) };
    let rollout = run_simulate(&ctx, kind, &setting, a.seed)?;
    let r = &rollout.result;

    let mut out = OutDir::create(&a.out)?;
    out.write_with("trajectory.csv", |w| Ok(write_trajectory_csv(&r.trajectory, w)?))?;
    if kind == MethodKind::Proposed {
        out.write_with("diagnostics.csv", |w| Ok(write_diagnostics_csv(&rollout.diagnostics, w)?))?;
    }
    let report = SimulateReport {
        method: kind.id(),
        setting,
        safe: r.safe,
        traveling_time: r.traveling_time,
        min_distance: r.min_distance,
        collision_time: r.collision_time,
        emergency_time: r.emergency_time,
        reached_safe_dist: r.reached_safe_dist,
        steps: r.trajectory.len(),
    };
    out.write_json("result.json", &report)?;
    println!(
        "{} from ({}, {}): {} after {:.2} s, min distance {:.3} m",
        kind.id(),
        a.x_init,
        a.v_init,
        if r.safe { "safe" } else { "collision" },
        r.traveling_time,
        r.min_distance
    );

    let mut m = Manifest::new("simulate", argv, a.seed, cli.workers, &cfg);
    m.overrides = a.scenario.overrides.clone();
    if let (Some(t), Some(p)) = (&table, &a.table) {
        m.tables.push(TableRef { path: p.clone(), meta: t.meta.clone() });
    }
    out.finish(m)?;
    Ok(Outcome::Done)
}

/// Experiment spec with command-line flags folded in.
struct Study {
    spec: ExperimentSpec,
    cfg: ScenarioConfig,
    table: Option<(PathBuf, RiskTable)>,
}

impl Study {
    fn load(a: &StudyArgs) -> Result<Self> {
        let mut spec = match &a.spec {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::default(),
        };
        if !a.methods.is_empty() {
            spec.methods = a.methods.iter().map(|m| MethodKind::parse(m)).collect::<Result<_, _>>()?;
        }
        if !a.settings.is_empty() {
            spec.settings = a.settings.iter().map(|s| parse_setting(s)).collect::<Result<_>>()?;
        }
        if let Some(n) = a.trials {
            spec.trials = n;
            spec.alpha.trials = n;
        }
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        if let Some(t) = a.t_end {
            spec.t_end = t;
        }
        if let Some(eta) = a.eta {
            spec.controllers.safe.eta = eta;
        }
        if a.online {
            spec.controllers.safe.mode = RiskMode::Online;
        }
        if a.table.is_some() {
            spec.table = a.table.clone();
        }
        if a.no_checks {
            spec.checks = false;
        }
        spec.validate()?;
        let cfg = scenario(&a.scenario)?;
        let table = match &spec.table {
            Some(p) => Some((p.clone(), load_table(p)?)),
            None => None,
        };
        Ok(Self { spec, cfg, table })
    }

    fn ctx<'a>(&'a self, exec: Exec) -> EvalContext<'a> {
        EvalContext {
            cfg: &self.cfg,
            methods: &self.spec.controllers,
            table: self.table.as_ref().map(|(_, t)| t),
            t_end: self.spec.t_end,
            exec,
        }
    }

    fn manifest(&self, command: &'static str, a: &StudyArgs, argv: &[String], workers: usize) -> Manifest {
        let mut m = Manifest::new(command, argv, self.spec.seed, workers, &self.cfg);
        m.overrides = a.scenario.overrides.clone();
        m.experiment = Some(self.spec.clone());
        if let Some((p, t)) = &self.table {
            m.tables.push(TableRef { path: p.clone(), meta: t.meta.clone() });
        }
        m
    }

    fn run_grid(&self, exec: Exec) -> Result<Vec<Evaluation>> {
        let ctx = self.ctx(exec);
        let mut evals = Vec::new();
        for s in &self.spec.settings {
            for m in &self.spec.methods {
                let e = run_evaluate(&ctx, *m, s, self.spec.trials, self.spec.seed)?;
                print_summary(&e.summary);
                evals.push(e);
            }
        }
        Ok(evals)
    }
}

fn print_summary(s: &EvalSummary) {
    println!(
        "{:<22} x={:<7} v={:<5} target={:<5} p_safe={:.4} [{:.4}, {:.4}] mean_t={:.3} collisions={} timeouts={}",
        s.method,
        s.x_init,
        s.v_init,
        s.safety.map_or("-".to_string(), |x| x.to_string()),
        s.p_safe,
        s.wilson_lo,
        s.wilson_hi,
        s.mean_t,
        s.collisions,
        s.timeouts
    );
}

#[derive(Serialize)]
struct StudyReport<'a, T: Serialize> {
    name: &'a str,
    seed: u64,
    trials: usize,
    results: T,
    checks: &'a [Check],
    all_passed: bool,
}

fn write_report<T: Serialize>(out: &mut OutDir, spec: &ExperimentSpec, results: T, checks: &[Check]) -> Result<()> {
    out.write_json(
        "report.json",
        &StudyReport {
            name: &spec.name,
            seed: spec.seed,
            trials: spec.trials,
            results,
            checks,
            all_passed: checks::all_passed(checks),
        },
    )
}

fn summaries(evals: &[Evaluation]) -> Vec<EvalSummary> {
    evals.iter().map(|e| e.summary.clone()).collect()
}

pub fn evaluate(cli: &Cli, a: &EvaluateArgs, argv: &[String]) -> Result<Outcome> {
    let study = Study::load(&a.study)?;
    let mut out = OutDir::create(&a.study.out)?;
    let evals = study.run_grid(exec(cli))?;
    let rows = summaries(&evals);
    out.write_with("summary.csv", |w| Ok(write_summaries_csv(&rows, w)?))?;

    let mut checks = Vec::new();
    if study.spec.checks {
        checks = checks::study_checks(&evals, study.spec.seed);
    }
    if a.check_trend {
        let Some((_, table)) = &study.table else {
            bail!("--check-trend needs a risk table (--table or `table` in the spec)");
        };
        checks.push(checks::risk_trend(table));
    }
    write_report(&mut out, &study.spec, &rows, &checks)?;
    out.finish(study.manifest("evaluate", &a.study, argv, cli.workers))?;
    Ok(report_checks(&checks))
}

pub fn sweep(cli: &Cli, a: &StudyArgs, argv: &[String]) -> Result<Outcome> {
    let study = Study::load(a)?;
    let mut out = OutDir::create(&a.out)?;
    let ctx = study.ctx(exec(cli));
    let (points, evals) =
        tradeoff_sweep(&ctx, &study.spec.methods, &study.spec.settings, study.spec.trials, study.spec.seed)?;
    for e in &evals {
        print_summary(&e.summary);
    }
    for p in &points {
        println!("{:<12} mean_p_safe={:.4} mean_norm_time={:.4}", p.method, p.mean_p_safe, p.mean_norm_time);
    }
    out.write_with("sweep.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for p in &points {
            c.serialize(p)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let rows = summaries(&evals);
    out.write_with("summary.csv", |w| Ok(write_summaries_csv(&rows, w)?))?;
    let checks = if study.spec.checks { checks::study_checks(&evals, study.spec.seed) } else { Vec::new() };
    write_report(&mut out, &study.spec, &points, &checks)?;
    out.finish(study.manifest("sweep", a, argv, cli.workers))?;
    Ok(report_checks(&checks))
}

pub fn ablate(cli: &Cli, a: &AblateArgs, argv: &[String]) -> Result<Outcome> {
    let mut study = Study::load(&a.study)?;
    if !a.etas.is_empty() {
        study.spec.alpha.etas = a.etas.clone();
    }
    let mut out = OutDir::create(&a.study.out)?;
    let ex = exec(cli);
    let mut checks = Vec::new();
    let mut used_tables = Vec::new();

    if a.alpha {
        let ctx = study.ctx(ex);
        let alpha = &study.spec.alpha;
        let results = alpha_ablation(&ctx, &alpha.etas, &alpha.setting, alpha.trials, study.spec.seed)?;
        let rows: Vec<EvalSummary> = results.iter().map(|(_, e)| e.summary.clone()).collect();
        rows.iter().for_each(print_summary);
        out.write_with("alpha.csv", |w| Ok(write_summaries_csv(&rows, w)?))?;
        if study.spec.checks {
            checks.push(checks::alpha_robustness(&results));
        }
        write_report(&mut out, &study.spec, &rows, &checks)?;
    } else {
        if study.spec.distributions.is_empty() {
            bail!("--distributions needs [[distributions]] entries in the experiment spec");
        }
        let mut tables = Vec::new();
        let mut cfgs = Vec::new();
        for d in &study.spec.distributions {
            let (first, subsequent) = d.spawns()?;
            let mut cfg = study.cfg.clone();
            cfg.first_spawn = first;
            cfg.subsequent_spawn = subsequent;
            cfg.validate()?;
            cfgs.push(cfg);
            tables.push(load_table(&d.table)?);
        }
        let cases: Vec<DistributionCase<'_>> = study
            .spec
            .distributions
            .iter()
            .zip(cfgs)
            .zip(&tables)
            .map(|((d, cfg), table)| DistributionCase { name: d.name.clone(), cfg, table, table_path: d.table.clone() })
            .collect();
        let runs = distribution_ablation(
            &cases,
            &study.spec.controllers,
            &study.spec.distribution_setting,
            study.spec.trials,
            study.spec.seed,
            study.spec.t_end,
            ex,
        )?;
        let rows: Vec<EvalSummary> = runs.iter().map(|r| r.evaluation.summary.clone()).collect();
        rows.iter().for_each(print_summary);
        out.write_with("distributions.csv", |w| Ok(write_summaries_csv(&rows, w)?))?;
        for r in &runs {
            let stem = file_stem(&r.name);
            out.write_with(&format!("trajectory_{stem}.csv"), |w| {
                Ok(write_trajectory_csv(&r.trace.result.trajectory, w)?)
            })?;
            out.write_with(&format!("diagnostics_{stem}.csv"), |w| {
                Ok(write_diagnostics_csv(&r.trace.diagnostics, w)?)
            })?;
        }
        write_report(&mut out, &study.spec, &rows, &checks)?;
        used_tables =
            cases.iter().map(|c| TableRef { path: c.table_path.clone(), meta: c.table.meta.clone() }).collect();
    }
    let mut m = study.manifest("ablate", &a.study, argv, cli.workers);
    m.tables.extend(used_tables);
    out.finish(m)?;
    Ok(report_checks(&checks))
}
