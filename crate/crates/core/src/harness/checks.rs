//! Pass/fail assertions embedded in studies.
//!
//! Each check is computed from study output only, so the CLI can attach them
//! to any run and the acceptance suite can print them verbatim.

use serde::{Deserialize, Serialize};

use crate::risk::RiskTable;
use crate::stats::spearman;

use super::method::MethodKind;
use super::study::{compare_times, EvalSummary, Evaluation};

/// Allowed shortfall of the Wilson lower bound below `1 - epsilon`.
pub const EPSILON_SLACK: f64 = 0.05;
/// Floor on empirical safety for every slope in the alpha study.
pub const ALPHA_FLOOR: f64 = 0.85;
/// Minimum magnitude of the rank correlations in the risk-field trend.
pub const TREND_RHO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Wilson lower bound of the safety estimate against `1 - epsilon - slack`.
/// `None` for summaries without a safety target.
pub fn epsilon_bound(s: &EvalSummary) -> Option<Check> {
    let target = s.safety?;
    let floor = target - EPSILON_SLACK;
    Some(Check::new(
        format!("epsilon-bound {} @ ({}, {}, {})", s.method, s.x_init, s.v_init, target),
        s.wilson_lo >= floor,
        format!("wilson_lo={:.4} floor={:.4} p_safe={:.4} n={}", s.wilson_lo, floor, s.p_safe, s.n_trials),
    ))
}

/// Paired one-sided bootstrap that `fast` has a smaller mean time than `slow`.
pub fn faster_than(fast: &Evaluation, slow: &Evaluation, root: u64) -> Check {
    let b = compare_times(fast, slow, root);
    let s = &fast.summary;
    Check::new(
        format!("efficiency {} < {} @ ({}, {})", s.method, slow.summary.method, s.x_init, s.v_init),
        b.a_less_than_b(),
        format!(
            "mean_t {:.3} vs {:.3}, mean diff {:.3}, upper95 {:.3}",
            s.mean_t, slow.summary.mean_t, b.mean_diff, b.upper95
        ),
    )
}

/// Some setting where the risky baseline is separated from the reference
/// controller: its Wilson upper bound lies below the reference lower bound.
pub fn exposure(pairs: &[(&EvalSummary, &EvalSummary)]) -> Check {
    let mut best: Option<(f64, &EvalSummary, &EvalSummary)> = None;
    for (risky, reference) in pairs {
        let gap = reference.wilson_lo - risky.wilson_hi;
        if best.is_none_or(|(g, _, _)| gap > g) {
            best = Some((gap, risky, reference));
        }
    }
    match best {
        None => Check::new("baseline-exposure", false, "no paired settings".into()),
        Some((gap, r, p)) => Check::new(
            "baseline-exposure",
            gap > 0.0,
            format!(
                "widest gap at ({}, {}): {} hi={:.4} vs {} lo={:.4}",
                r.x_init, r.v_init, r.method, r.wilson_hi, p.method, p.wilson_lo
            ),
        ),
    }
}

/// Rank correlations of the risk field along the cuts used for the trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// `rho(psi, -p)` along the columns v = 2 and v = 6.
    pub distance: [Option<f64>; 2],
    /// `rho(psi, v)` along the rows p = -60 and p = -120.
    pub speed: [Option<f64>; 2],
}

pub const TREND_SPEEDS: [f64; 2] = [2.0, 6.0];
pub const TREND_POSITIONS: [f64; 2] = [-60.0, -120.0];

fn axis_index(axis: &[f64], x: f64) -> Option<usize> {
    axis.iter().position(|a| (a - x).abs() < 1e-9)
}

pub fn trend_report(table: &RiskTable) -> TrendReport {
    let (ps, vs) = (table.p_axis(), table.v_axis());
    let neg_p: Vec<f64> = ps.iter().map(|p| -p).collect();
    let distance = TREND_SPEEDS.map(|v| {
        let iv = axis_index(vs, v)?;
        let col: Vec<f64> = (0..ps.len()).map(|ip| table.get(ip, iv)).collect();
        spearman(&col, &neg_p)
    });
    let speed = TREND_POSITIONS.map(|p| {
        let ip = axis_index(ps, p)?;
        spearman(table.row(ip), vs)
    });
    TrendReport { distance, speed }
}

/// Risk grows toward the crossing and with speed.
pub fn risk_trend(table: &RiskTable) -> Check {
    let r = trend_report(table);
    let fmt = |x: Option<f64>| x.map_or("undefined".to_string(), |x| format!("{x:.3}"));
    let passed = r.distance.iter().all(|x| x.is_some_and(|x| x > TREND_RHO))
        && r.speed.iter().all(|x| x.is_some_and(|x| x < -TREND_RHO));
    let detail = format!(
        "rho(psi,-p) v=2: {}, v=6: {}; rho(psi,v) p=-60: {}, p=-120: {}",
        fmt(r.distance[0]),
        fmt(r.distance[1]),
        fmt(r.speed[0]),
        fmt(r.speed[1])
    );
    Check::new("risk-trend", passed, detail)
}

pub fn alpha_robustness(results: &[(f64, Evaluation)]) -> Check {
    let worst = results.iter().min_by(|a, b| a.1.summary.p_safe.total_cmp(&b.1.summary.p_safe));
    match worst {
        None => Check::new("alpha-robustness", false, "no slopes evaluated".into()),
        Some((eta, e)) => Check::new(
            "alpha-robustness",
            results.iter().all(|(_, e)| e.summary.p_safe >= ALPHA_FLOOR),
            format!("lowest p_safe {:.4} at eta={eta} (floor {ALPHA_FLOOR})", e.summary.p_safe),
        ),
    }
}

fn find(evals: &[Evaluation], kind: MethodKind, x: f64, v: f64) -> Option<&Evaluation> {
    evals.iter().find(|e| e.summary.method == kind.id() && e.summary.x_init == x && e.summary.v_init == v)
}

/// Checks that apply to a method-by-setting grid: the epsilon bound for the
/// proposed controller everywhere, its speed advantage over the worst-case
/// baseline at every setting, and PID exposure somewhere. Comparisons are
/// skipped when one side was not run.
pub fn study_checks(evals: &[Evaluation], root: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let proposed: Vec<&Evaluation> = evals.iter().filter(|e| e.summary.method == MethodKind::Proposed.id()).collect();
    out.extend(proposed.iter().filter_map(|e| epsilon_bound(&e.summary)));
    for p in &proposed {
        if let Some(w) = find(evals, MethodKind::WorstCase, p.summary.x_init, p.summary.v_init) {
            out.push(faster_than(p, w, root));
        }
    }
    let pairs: Vec<(&EvalSummary, &EvalSummary)> = proposed
        .iter()
        .filter_map(|p| {
            find(evals, MethodKind::Pid, p.summary.x_init, p.summary.v_init).map(|d| (&d.summary, &p.summary))
        })
        .collect();
    if !pairs.is_empty() {
        out.push(exposure(&pairs));
    }
    out
}
