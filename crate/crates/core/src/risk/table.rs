use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;

use super::estimator::estimate_unchecked;

pub const TABLE_FORMAT: &str = "occsafe-risk-table";
pub const TABLE_VERSION: u32 = 1;

/// Regular grid over initial position and speed, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p_min: f64,
    pub p_max: f64,
    pub dp: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub dv: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { p_min: -180.0, p_max: 0.0, dp: 2.0, v_min: 0.0, v_max: 10.0, dv: 0.5 }
    }
}

fn axis(lo: f64, hi: f64, step: f64, name: &str) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo > hi {
        return Err(Error::InvalidArgument(format!("{name} axis [{lo}, {hi}] is invalid")));
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} step must be positive")));
    }
    let span = (hi - lo) / step;
    let n = span.round();
    if (span - n).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("{name} axis [{lo}, {hi}] is not a multiple of step {step}")));
    }
    Ok((0..=n as usize).map(|i| lo + i as f64 * step).collect())
}

impl GridSpec {
    /// Single cell at `(p, v)`.
    pub fn point(p: f64, v: f64) -> Self {
        Self { p_min: p, p_max: p, dp: 1.0, v_min: v, v_max: v, dv: 1.0 }
    }

    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((axis(self.p_min, self.p_max, self.dp, "position")?, axis(self.v_min, self.v_max, self.dv, "speed")?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMeta {
    /// Trials per cell.
    pub n_trials: usize,
    /// Estimation horizon (s).
    pub horizon: f64,
    pub root_seed: u64,
    pub fingerprint: String,
    pub dt: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub cells: usize,
    /// Cells whose position is already past `safe_dist` (Ψ = 1 trivially).
    pub cells_past_safe_dist: usize,
}

/// Gridded Ψ over initial `(p, v)`. Values are stored row-major with one row
/// per position.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    p_axis: Vec<f64>,
    v_axis: Vec<f64>,
    values: Vec<f64>,
    pub meta: TableMeta,
}

/// Result of an interpolated query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub psi: f64,
    /// The query was outside the grid and was clamped to its edge.
    pub clamped: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    format: String,
    version: u32,
    meta: TableMeta,
    p_axis: Vec<f64>,
    v_axis: Vec<f64>,
    values: Vec<Vec<f64>>,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
}

impl RiskTable {
    pub fn new(p_axis: Vec<f64>, v_axis: Vec<f64>, values: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if p_axis.is_empty() || v_axis.is_empty() {
            return Err(Error::Table("empty axis".into()));
        }
        if !strictly_increasing(&p_axis) || !strictly_increasing(&v_axis) {
            return Err(Error::Table("axes must be finite and strictly increasing".into()));
        }
        if values.len() != p_axis.len() * v_axis.len() {
            return Err(Error::Table(format!(
                "expected {}x{} values, got {}",
                p_axis.len(),
                v_axis.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Table(format!("value {bad} outside [0, 1]")));
        }
        Ok(Self { p_axis, v_axis, values, meta })
    }

    /// Table filled from a closed-form field, for synthetic tests and tools.
    pub fn from_fn(p_axis: Vec<f64>, v_axis: Vec<f64>, meta: TableMeta, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = p_axis.iter().flat_map(|&p| v_axis.iter().map(move |&v| (p, v))).map(|(p, v)| f(p, v)).collect();
        Self::new(p_axis, v_axis, values, meta)
    }

    pub fn p_axis(&self) -> &[f64] {
        &self.p_axis
    }

    pub fn v_axis(&self) -> &[f64] {
        &self.v_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ip: usize, iv: usize) -> f64 {
        self.values[ip * self.v_axis.len() + iv]
    }

    /// Values along the speed axis at position index `ip`.
    pub fn row(&self, ip: usize) -> &[f64] {
        let nv = self.v_axis.len();
        &self.values[ip * nv..(ip + 1) * nv]
    }

    pub fn p_range(&self) -> (f64, f64) {
        (self.p_axis[0], *self.p_axis.last().unwrap())
    }

    pub fn v_range(&self) -> (f64, f64) {
        (self.v_axis[0], *self.v_axis.last().unwrap())
    }

    /// Bilinear interpolation; exact at nodes, clamped outside the grid.
    pub fn lookup(&self, p: f64, v: f64) -> Lookup {
        let (ip, tp, cp) = locate(&self.p_axis, p);
        let (iv, tv, cv) = locate(&self.v_axis, v);
        let ip1 = (ip + 1).min(self.p_axis.len() - 1);
        let iv1 = (iv + 1).min(self.v_axis.len() - 1);
        let f00 = self.get(ip, iv);
        let f01 = self.get(ip, iv1);
        let f10 = self.get(ip1, iv);
        let f11 = self.get(ip1, iv1);
        let psi = (1.0 - tp) * ((1.0 - tv) * f00 + tv * f01) + tp * ((1.0 - tv) * f10 + tv * f11);
        Lookup { psi: psi.clamp(0.0, 1.0), clamped: cp || cv }
    }

    pub fn fingerprint_matches(&self, cfg: &ScenarioConfig) -> bool {
        self.meta.fingerprint == cfg.fingerprint()
    }

    /// Logs a warning when the table was built for a different scenario.
    pub fn warn_if_mismatched(&self, cfg: &ScenarioConfig, origin: &str) -> bool {
        let ok = self.fingerprint_matches(cfg);
        if !ok {
            log::warn!(
                "risk table {origin} was built for scenario {} but the active scenario is {}",
                self.meta.fingerprint,
                cfg.fingerprint()
            );
        }
        ok
    }

    pub fn ensure_matches(&self, cfg: &ScenarioConfig, path: &Path) -> Result<()> {
        if self.fingerprint_matches(cfg) {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                path: path.to_path_buf(),
                expected: self.meta.fingerprint.clone(),
                actual: cfg.fingerprint(),
            })
        }
    }

    pub fn to_json(&self) -> String {
        let nv = self.v_axis.len();
        let file = TableFile {
            format: TABLE_FORMAT.into(),
            version: TABLE_VERSION,
            meta: self.meta.clone(),
            p_axis: self.p_axis.clone(),
            v_axis: self.v_axis.clone(),
            values: self.values.chunks(nv).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string_pretty(&file).expect("risk table serialises")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse { path: origin.to_path_buf(), message };
        let file: TableFile = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if file.format != TABLE_FORMAT {
            return Err(parse_err(format!("not a risk table (format `{}`)", file.format)));
        }
        if file.version != TABLE_VERSION {
            return Err(parse_err(format!(
                "unsupported risk table version {} (expected {TABLE_VERSION})",
                file.version
            )));
        }
        if file.values.len() != file.p_axis.len() || file.values.iter().any(|row| row.len() != file.v_axis.len()) {
            return Err(parse_err("value matrix does not match the axes".into()));
        }
        let values = file.values.into_iter().flatten().collect();
        Self::new(file.p_axis, file.v_axis, values, file.meta).map_err(|e| parse_err(e.to_string()))
    }

    /// Writes via a temporary file and rename, so readers never observe a
    /// partial table.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// `p,v,psi`, one line per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "v", "psi"])?;
        for (ip, p) in self.p_axis.iter().enumerate() {
            for (iv, v) in self.v_axis.iter().enumerate() {
                w.write_record([p.to_string(), v.to_string(), self.get(ip, iv).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<risk table csv>", e))?;
        Ok(())
    }
}

/// Lower bracketing index, interpolation weight and clamp flag.
fn locate(axis: &[f64], x: f64) -> (usize, f64, bool) {
    let n = axis.len();
    if x.is_nan() {
        return (0, 0.0, true);
    }
    if x <= axis[0] {
        return (0, 0.0, x < axis[0]);
    }
    if x >= axis[n - 1] {
        return (n - 1, 0.0, x > axis[n - 1]);
    }
    let hi = axis.partition_point(|a| *a <= x);
    let lo = hi - 1;
    (lo, (x - axis[lo]) / (axis[hi] - axis[lo]), false)
}

/// Estimates Ψ on every grid cell.
///
/// Cells run in parallel under `exec`; every cell uses the same per-trial
/// world seeds (common random numbers), so neighbouring cells differ only
/// through the ego's initial state.
pub fn build_risk_table(
    cfg: &ScenarioConfig,
    grid: &GridSpec,
    n_trials: usize,
    horizon: f64,
    root_seed: u64,
    exec: Exec,
) -> Result<(RiskTable, BuildReport)> {
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let (p_axis, v_axis) = grid.axes()?;
    let nv = v_axis.len();
    let cells = p_axis.len() * nv;
    let past = p_axis.iter().filter(|p| **p >= cfg.safe_dist).count() * nv;
    if past > 0 {
        log::warn!("{past} grid cells lie past safe_dist = {}; their Ψ is trivially 1", cfg.safe_dist);
    }
    let values = exec.try_map(cells, |c| {
        let (p, v) = (p_axis[c / nv], v_axis[c % nv]);
        estimate_unchecked(cfg, horizon, p, v, n_trials, root_seed).map(|e| e.psi)
    })?;
    let meta = TableMeta { n_trials, horizon, root_seed, fingerprint: cfg.fingerprint(), dt: cfg.dt };
    let table = RiskTable::new(p_axis, v_axis, values, meta)?;
    Ok((table, BuildReport { cells, cells_past_safe_dist: past }))
}
