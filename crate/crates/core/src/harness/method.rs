use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::control::{
    Cruise, DiagnosticsRow, Pid, PidGains, Planning, PlanningProfile, RiskMode, SafeController, SafeControllerParams,
    WorstCase,
};
use crate::error::{Error, Result};
use crate::risk::{OnlineEstimator, RiskSource, RiskTable};
use crate::seed;
use crate::sim::{Controller, EmergencyMode, Observation};
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Probabilistic safe controller.
    Proposed,
    WorstCase,
    Pid,
    Planning,
    /// Bare nominal cruise.
    Cruise,
}

impl MethodKind {
    pub const STUDIED: [MethodKind; 4] =
        [MethodKind::Proposed, MethodKind::WorstCase, MethodKind::Pid, MethodKind::Planning];

    pub fn id(&self) -> &'static str {
        match self {
            MethodKind::Proposed => "proposed",
            MethodKind::WorstCase => "worst_case",
            MethodKind::Pid => "pid",
            MethodKind::Planning => "planning",
            MethodKind::Cruise => "cruise",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let all =
            [MethodKind::Proposed, MethodKind::WorstCase, MethodKind::Pid, MethodKind::Planning, MethodKind::Cruise];
        let key = s.trim().replace('-', "_");
        all.into_iter().find(|m| m.id() == key).ok_or_else(|| {
            let names: Vec<_> = all.iter().map(MethodKind::id).collect();
            Error::InvalidArgument(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
        })
    }

    pub fn needs_table(&self, safe: &SafeControllerParams) -> bool {
        match self {
            MethodKind::Proposed => safe.mode == RiskMode::Table,
            MethodKind::WorstCase => true,
            _ => false,
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Whether the world's emergency brake acts on each method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmergencyPolicy {
    pub proposed: EmergencyMode,
    pub worst_case: EmergencyMode,
    pub pid: EmergencyMode,
    pub planning: EmergencyMode,
    pub cruise: EmergencyMode,
}

impl Default for EmergencyPolicy {
    fn default() -> Self {
        Self {
            proposed: EmergencyMode::Latch,
            worst_case: EmergencyMode::Latch,
            pid: EmergencyMode::Off,
            planning: EmergencyMode::WhileVisible,
            cruise: EmergencyMode::Latch,
        }
    }
}

impl EmergencyPolicy {
    pub fn for_method(&self, kind: MethodKind) -> EmergencyMode {
        match kind {
            MethodKind::Proposed => self.proposed,
            MethodKind::WorstCase => self.worst_case,
            MethodKind::Pid => self.pid,
            MethodKind::Planning => self.planning,
            MethodKind::Cruise => self.cruise,
        }
    }
}

/// Parameters of every method; only the relevant block is read per method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub safe: SafeControllerParams,
    pub pid: PidGains,
    pub planning: PlanningProfile,
    pub emergency: EmergencyPolicy,
}

/// Any of the controllers, so the harness can run them uniformly and still
/// reach method-specific output afterwards.
pub enum AnyController<'a> {
    Cruise(Cruise),
    Pid(Pid),
    Planning(Planning),
    WorstCase(WorstCase<'a>),
    Safe(SafeController<'a>),
}

impl AnyController<'_> {
    pub fn diagnostics(&self) -> &[DiagnosticsRow] {
        match self {
            AnyController::Safe(c) => c.diagnostics(),
            _ => &[],
        }
    }

    fn inner(&mut self) -> &mut dyn Controller {
        match self {
            AnyController::Cruise(c) => c,
            AnyController::Pid(c) => c,
            AnyController::Planning(c) => c,
            AnyController::WorstCase(c) => c,
            AnyController::Safe(c) => c,
        }
    }
}

impl Controller for AnyController<'_> {
    fn emergency_mode(&self) -> EmergencyMode {
        match self {
            AnyController::Cruise(c) => c.emergency_mode(),
            AnyController::Pid(c) => c.emergency_mode(),
            AnyController::Planning(c) => c.emergency_mode(),
            AnyController::WorstCase(c) => c.emergency_mode(),
            AnyController::Safe(c) => c.emergency_mode(),
        }
    }

    fn control(&mut self, obs: &Observation) -> Result<f64> {
        self.inner().control(obs)
    }
}

/// Instantiates `kind` for one trial.
///
/// `safety` overrides the safe controller's 1 − ε. `trial_seed` seeds the
/// online probes of an online-mode safe controller.
pub fn build_controller<'a>(
    kind: MethodKind,
    cfg: &ScenarioConfig,
    methods: &MethodConfig,
    safety: Option<f64>,
    table: Option<&'a RiskTable>,
    trial_seed: u64,
    diagnostics: bool,
) -> Result<AnyController<'a>> {
    let emergency = methods.emergency.for_method(kind);
    let need_table = || table.ok_or_else(|| Error::MissingTable { method: kind.id().to_string() });
    Ok(match kind {
        MethodKind::Cruise => AnyController::Cruise(Cruise::from_config(cfg).with_emergency(emergency)),
        MethodKind::Pid => {
            let mut c = Pid::new(cfg, methods.pid);
            c.emergency = emergency;
            AnyController::Pid(c)
        }
        MethodKind::Planning => {
            let mut c = Planning::new(cfg, methods.planning);
            c.emergency = emergency;
            AnyController::Planning(c)
        }
        MethodKind::WorstCase => {
            let mut c = WorstCase::new(cfg, Box::new(need_table()?));
            c.emergency = emergency;
            AnyController::WorstCase(c)
        }
        MethodKind::Proposed => {
            let mut params = methods.safe;
            if let Some(s) = safety {
                params = params.with_target(s);
            }
            let risk: Box<dyn RiskSource + 'a> = match params.mode {
                RiskMode::Table => Box::new(need_table()?),
                RiskMode::Online => Box::new(OnlineEstimator {
                    cfg: cfg.clone(),
                    horizon: params.horizon,
                    n: params.n_online,
                    seed: seed::derive(trial_seed, seed::stream::ONLINE_PROBE, 0),
                    exec: Exec::Sequential,
                }),
            };
            let mut c = SafeController::new(cfg, params, risk)?;
            if diagnostics {
                c = c.with_diagnostics();
            }
            c.emergency = emergency;
            AnyController::Safe(c)
        }
    })
}
