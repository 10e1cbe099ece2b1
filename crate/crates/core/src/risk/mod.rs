//! Monte Carlo estimation of the long-term safety probability Ψ(p, v) and
//! the gridded tables built from it.

mod estimator;
mod gradient;
mod table;

pub use estimator::{
    ego_safety, estimate_safety_probability, estimate_safety_probability_with, EstimationPolicy, SafetyEstimate,
};
pub use gradient::{gradient, Domain, GradientEstimate, OnlineEstimator, RiskSource};
pub use table::{build_risk_table, BuildReport, GridSpec, Lookup, RiskTable, TableMeta, TABLE_FORMAT, TABLE_VERSION};
