use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;

use super::estimator::estimate_safety_probability_with;
use super::table::RiskTable;

/// Box on which a risk source is defined. Probes are clamped into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub p_min: f64,
    pub p_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Anything that can report Ψ at an ego state.
pub trait RiskSource: Sync {
    fn psi(&self, p: f64, v: f64) -> Result<f64>;

    fn domain(&self) -> Domain;

    /// True for sources that must not be queried outside [`RiskSource::domain`].
    fn bounded(&self) -> bool {
        true
    }
}

impl<T: RiskSource + ?Sized> RiskSource for &T {
    fn psi(&self, p: f64, v: f64) -> Result<f64> {
        (**self).psi(p, v)
    }

    fn domain(&self) -> Domain {
        (**self).domain()
    }

    fn bounded(&self) -> bool {
        (**self).bounded()
    }
}

impl RiskSource for RiskTable {
    fn psi(&self, p: f64, v: f64) -> Result<f64> {
        Ok(self.lookup(p, v).psi)
    }

    fn domain(&self) -> Domain {
        let (p_min, p_max) = self.p_range();
        let (v_min, v_max) = self.v_range();
        Domain { p_min, p_max, v_min, v_max }
    }
}

/// Monte Carlo Ψ evaluated on demand at the queried state.
///
/// Every query reuses the same root seed, so probes around one state share
/// their pedestrian worlds and their difference is not swamped by sampling
/// noise.
#[derive(Debug, Clone)]
pub struct OnlineEstimator {
    pub cfg: ScenarioConfig,
    pub horizon: f64,
    pub n: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl RiskSource for OnlineEstimator {
    fn psi(&self, p: f64, v: f64) -> Result<f64> {
        estimate_safety_probability_with(&self.cfg, self.horizon, p, v, self.n, self.seed, self.exec).map(|e| e.psi)
    }

    fn domain(&self) -> Domain {
        Domain { p_min: f64::NEG_INFINITY, p_max: f64::INFINITY, v_min: 0.0, v_max: f64::INFINITY }
    }

    fn bounded(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub dpsi_dp: f64,
    pub dpsi_dv: f64,
    pub dx: f64,
    pub dv: f64,
}

/// Central difference along one axis. Probes falling off the domain are
/// pulled back onto it and the quotient uses the actual probe span, which
/// degrades to a one-sided difference at an edge.
fn axis_probe(x: f64, h: f64, lo: f64, hi: f64, name: &str, bounded: bool) -> Result<(f64, f64)> {
    if bounded && (x + h < lo || x - h > hi) {
        return Err(Error::InvalidArgument(format!(
            "{name} probes around {x} lie outside the table range [{lo}, {hi}]"
        )));
    }
    let a = (x - h).clamp(lo, hi);
    let b = (x + h).clamp(lo, hi);
    Ok((a, b))
}

/// Finite-difference gradient of Ψ at `(p, v)` with probe steps `dx`, `dv`.
pub fn gradient<S: RiskSource + ?Sized>(source: &S, p: f64, v: f64, dx: f64, dv: f64) -> Result<GradientEstimate> {
    if !(dx > 0.0 && dv > 0.0) || !dx.is_finite() || !dv.is_finite() {
        return Err(Error::InvalidArgument(format!("probe steps must be positive, got ({dx}, {dv})")));
    }
    if !p.is_finite() || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite state ({p}, {v})")));
    }
    let d = source.domain();
    let bounded = source.bounded();
    let (p_lo, p_hi) = axis_probe(p, dx, d.p_min, d.p_max, "position", bounded)?;
    let (v_lo, v_hi) = axis_probe(v, dv, d.v_min, d.v_max, "speed", bounded)?;
    let quotient = |hi: f64, lo: f64, span: f64| if span > 0.0 { (hi - lo) / span } else { 0.0 };
    let vc = v.clamp(d.v_min, d.v_max);
    let pc = p.clamp(d.p_min, d.p_max);
    let dpsi_dp = quotient(source.psi(p_hi, vc)?, source.psi(p_lo, vc)?, p_hi - p_lo);
    let dpsi_dv = quotient(source.psi(pc, v_hi)?, source.psi(pc, v_lo)?, v_hi - v_lo);
    Ok(GradientEstimate { dpsi_dp, dpsi_dv, dx, dv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::TableMeta;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn meta() -> TableMeta {
        TableMeta { n_trials: 0, horizon: 10.0, root_seed: 0, fingerprint: String::new(), dt: 0.05 }
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    fn sigma(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    fn logistic(p: f64, v: f64) -> f64 {
        sigma(0.05 * p - 0.2 * v)
    }

    /// Analytic partials of σ(0.05p − 0.2v).
    fn logistic_grad(p: f64, v: f64) -> (f64, f64) {
        let s = logistic(p, v);
        (0.05 * s * (1.0 - s), -0.2 * s * (1.0 - s))
    }

    fn fine_logistic() -> RiskTable {
        RiskTable::from_fn(grid(-90.0, 10.0, 0.05), grid(-2.0, 12.0, 0.05), meta(), logistic).unwrap()
    }

    struct Field<F>(F);

    impl<F: Fn(f64, f64) -> f64 + Sync> RiskSource for Field<F> {
        fn psi(&self, p: f64, v: f64) -> Result<f64> {
            Ok((self.0)(p, v))
        }
        fn domain(&self) -> Domain {
            Domain { p_min: f64::NEG_INFINITY, p_max: f64::INFINITY, v_min: f64::NEG_INFINITY, v_max: f64::INFINITY }
        }
        fn bounded(&self) -> bool {
            false
        }
    }

    fn max_error<S: RiskSource>(src: &S, dx: f64, dv: f64) -> f64 {
        let mut worst = 0.0f64;
        for p in grid(-80.0, 0.0, 8.0) {
            for v in grid(0.0, 10.0, 1.0) {
                let g = gradient(src, p, v, dx, dv).unwrap();
                let (ep, ev) = logistic_grad(p, v);
                worst = worst.max((g.dpsi_dp - ep).abs()).max((g.dpsi_dv - ev).abs());
            }
        }
        worst
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let t = RiskTable::from_fn(grid(-10.0, 0.0, 2.0), grid(0.0, 4.0, 0.5), meta(), |_, _| 0.7).unwrap();
        let g = gradient(&t, -5.0, 1.3, 2.0, 0.5).unwrap();
        assert_eq!((g.dpsi_dp, g.dpsi_dv), (0.0, 0.0));
    }

    #[test]
    fn logistic_table_matches_analytic_derivative() {
        let t = fine_logistic();
        let (dx, dv) = (2.0, 0.5);
        let err = max_error(&t, dx, dv);
        // Central differences: error ≈ f'''·h²/6; |σ'''| ≤ k³/6 per axis (k = 0.2).
        let bound = 0.2f64.powi(3) / 6.0 * dv * dv / 6.0 + 0.05f64.powi(3) / 6.0 * dx * dx / 6.0;
        assert!(err < bound + 1e-5, "err {err} bound {bound}");
    }

    #[test]
    fn halving_steps_is_second_order() {
        let t = fine_logistic();
        let f = Field(logistic);
        for ratio in
            [max_error(&t, 4.0, 1.0) / max_error(&t, 2.0, 0.5), max_error(&f, 4.0, 1.0) / max_error(&f, 2.0, 0.5)]
        {
            assert!((2.5..=6.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn exact_on_affine_tables() {
        let t = RiskTable::from_fn(grid(-20.0, 0.0, 2.0), grid(0.0, 10.0, 0.5), meta(), |p, v| {
            0.5 + 0.01 * p - 0.03 * v + 0.2
        })
        .unwrap();
        for (p, v) in [(-10.0, 5.0), (-13.3, 2.2), (-19.0, 0.2), (-1.0, 9.9)] {
            let g = gradient(&t, p, v, 2.0, 0.5).unwrap();
            assert_abs_diff_eq!(g.dpsi_dp, 0.01, epsilon = 1e-12);
            assert_abs_diff_eq!(g.dpsi_dv, -0.03, epsilon = 1e-12);
        }
    }

    #[test]
    fn probes_outside_table_rejected() {
        let t = RiskTable::from_fn(grid(-20.0, 0.0, 2.0), grid(0.0, 10.0, 0.5), meta(), |_, _| 1.0).unwrap();
        assert!(gradient(&t, 5.0, 2.0, 2.0, 0.5).is_err());
        assert!(gradient(&t, -30.0, 2.0, 2.0, 0.5).is_err());
        assert!(gradient(&t, -10.0, 11.0, 2.0, 0.5).is_err());
        assert!(gradient(&t, 1.0, 2.0, 2.0, 0.5).is_ok());
        assert!(gradient(&t, -10.0, 2.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn online_source_agrees_with_no_risk_world() {
        let est = OnlineEstimator {
            cfg: ScenarioConfig::default().without_pedestrians(),
            horizon: 10.0,
            n: 10,
            seed: 3,
            exec: Exec::Sequential,
        };
        let g = gradient(&est, -30.0, 0.2, 2.0, 0.5).unwrap();
        assert_eq!((g.dpsi_dp, g.dpsi_dv), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn gradient_is_linear_in_values(
            a in -1.0..1.0f64, b in -1.0..1.0f64,
            p in -18.0..-2.0f64, v in 0.5..9.5f64,
        ) {
            let f = |p: f64, v: f64| 0.5 + 0.02 * (p * 0.3).sin() + 0.01 * v.cos();
            let g = |p: f64, v: f64| 0.5 + 0.01 * (p * 0.1).cos() - 0.02 * (v * 0.7).sin();
            let ps = grid(-20.0, 0.0, 2.0);
            let vs = grid(0.0, 10.0, 0.5);
            let tf = RiskTable::from_fn(ps.clone(), vs.clone(), meta(), f).unwrap();
            let tg = RiskTable::from_fn(ps.clone(), vs.clone(), meta(), g).unwrap();
            let mix = |p: f64, v: f64| 0.5 + a * 0.2 * (f(p, v) - 0.5) + b * 0.2 * (g(p, v) - 0.5);
            let tm = RiskTable::from_fn(ps, vs, meta(), mix).unwrap();
            let gf = gradient(&tf, p, v, 2.0, 0.5).unwrap();
            let gg = gradient(&tg, p, v, 2.0, 0.5).unwrap();
            let gm = gradient(&tm, p, v, 2.0, 0.5).unwrap();
            prop_assert!((gm.dpsi_dp - 0.2 * (a * gf.dpsi_dp + b * gg.dpsi_dp)).abs() < 1e-12);
            prop_assert!((gm.dpsi_dv - 0.2 * (a * gf.dpsi_dv + b * gg.dpsi_dv)).abs() < 1e-12);
        }
    }
}
