use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SpawnDistribution;
use crate::error::{Error, Result};

use super::method::{MethodConfig, MethodKind};

/// Cap on a deployment run (s); a run that has not reached `safe_dist` by
/// then ends as a safe timeout.
pub const DEFAULT_T_END: f64 = 120.0;

/// Initial ego state and, for the safe controller, the target 1 − ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub x_init: f64,
    pub v_init: f64,
    #[serde(default)]
    pub safety: Option<f64>,
}

impl Setting {
    pub fn new(x_init: f64, v_init: f64, safety: f64) -> Self {
        Self { x_init, v_init, safety: Some(safety) }
    }

    pub fn label(&self) -> String {
        match self.safety {
            Some(s) => format!("x={} v={} 1-eps={}", self.x_init, self.v_init, s),
            None => format!("x={} v={}", self.x_init, self.v_init),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x_init.is_finite() || !(self.v_init >= 0.0) || !self.v_init.is_finite() {
            return Err(Error::Config(format!("invalid setting {}", self.label())));
        }
        if let Some(s) = self.safety {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Config(format!("safety target must lie in (0, 1), got {s}")));
            }
        }
        Ok(())
    }
}

/// The five (x_init, v_init, 1 − ε) settings of the reference study.
pub fn standard_settings() -> Vec<Setting> {
    vec![
        Setting::new(-180.0, 5.0, 0.95),
        Setting::new(-180.0, 2.0, 0.9),
        Setting::new(-120.0, 6.0, 0.95),
        Setting::new(-120.0, 3.0, 0.9),
        Setting::new(-60.0, 2.0, 0.9),
    ]
}

/// Pedestrian arrival presets: 1 is the default scenario, 2 has frequent
/// early arrivals, 3 has none.
pub fn distribution_preset(k: u8) -> Option<(SpawnDistribution, SpawnDistribution)> {
    let std2 = 13f64.sqrt();
    match k {
        1 => Some((SpawnDistribution::new(1.5, 2.5, 0.0, 10.0), SpawnDistribution::new(6.0, 2.5, 0.0, 15.0))),
        2 => Some((SpawnDistribution::new(2.5, std2, 0.0, 10.0), SpawnDistribution::new(2.5, std2, 0.0, 15.0))),
        3 => Some((SpawnDistribution::never(), SpawnDistribution::never())),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaStudy {
    pub etas: Vec<f64>,
    pub setting: Setting,
    pub trials: usize,
}

impl Default for AlphaStudy {
    fn default() -> Self {
        Self { etas: vec![0.05, 0.1, 0.2, 0.5, 1.0], setting: Setting::new(-120.0, 0.0, 0.9), trials: 100 }
    }
}

/// One arm of the arrival-distribution ablation. Either `preset` or both
/// spawn distributions must be given; `table` must have been built under
/// the same arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub name: String,
    #[serde(default)]
    pub preset: Option<u8>,
    #[serde(default)]
    pub first_spawn: Option<SpawnDistribution>,
    #[serde(default)]
    pub subsequent_spawn: Option<SpawnDistribution>,
    pub table: PathBuf,
}

impl DistributionSpec {
    pub fn spawns(&self) -> Result<(SpawnDistribution, SpawnDistribution)> {
        match (self.preset, self.first_spawn, self.subsequent_spawn) {
            (Some(k), None, None) => distribution_preset(k)
                .ok_or_else(|| Error::Config(format!("distribution `{}`: unknown preset {k}", self.name))),
            (None, Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::Config(format!(
                "distribution `{}` needs either `preset` or both spawn distributions",
                self.name
            ))),
        }
    }
}

/// Experiment file: which methods to run where, how often, and with which
/// risk tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub t_end: f64,
    pub table: Option<PathBuf>,
    pub methods: Vec<MethodKind>,
    pub settings: Vec<Setting>,
    pub controllers: MethodConfig,
    pub alpha: AlphaStudy,
    pub distributions: Vec<DistributionSpec>,
    /// Start state and safety target of the distribution ablation.
    pub distribution_setting: Setting,
    /// Run the embedded acceptance checks and fail the run when one fails.
    pub checks: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            trials: 50,
            t_end: DEFAULT_T_END,
            table: None,
            methods: MethodKind::STUDIED.to_vec(),
            settings: standard_settings(),
            controllers: MethodConfig::default(),
            alpha: AlphaStudy::default(),
            distributions: Vec::new(),
            distribution_setting: Setting::new(-120.0, 0.0, 0.9),
            checks: true,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a spec; relative table paths are taken relative to its file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: Self =
            toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = spec.table.as_mut() {
            rebase(t);
        }
        for d in &mut spec.distributions {
            rebase(&mut d.table);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.alpha.trials == 0 {
            return Err(Error::Config("trial counts must be at least 1".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.methods.is_empty() || self.settings.is_empty() {
            return Err(Error::Config("an experiment needs at least one method and one setting".into()));
        }
        for s in self.settings.iter().chain([&self.alpha.setting, &self.distribution_setting]) {
            s.validate()?;
        }
        for d in &self.distributions {
            d.spawns()?;
        }
        self.controllers.safe.validate()
    }
}
