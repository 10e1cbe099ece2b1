//! Small statistics toolkit: Wilson intervals, rank correlation, paired
//! bootstrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson(k: u64, n: u64, z: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // The bounds are exactly 0 and 1 at the ends; rounding would miss them.
    Interval {
        lo: if k == 0 { 0.0 } else { (center - half).max(0.0) },
        hi: if k == n { 1.0 } else { (center + half).min(1.0) },
    }
}

pub fn wilson95(k: u64, n: u64) -> Interval {
    wilson(k, n, Z95)
}

/// Two-proportion z-test at 95%: are `k1/n1` and `k2/n2` compatible?
///
/// Uses the pooled standard error; when both proportions are 0 or both are 1
/// the difference is exactly zero and the samples are compatible.
pub fn proportions_compatible(k1: u64, n1: u64, k2: u64, n2: u64) -> bool {
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return p1 == p2;
    }
    ((p1 - p2) / se).abs() <= Z95
}

/// Average ranks (1-based); ties share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Spearman rank correlation with tie correction. `None` when either input
/// is constant (the coefficient is undefined) or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    pearson(&ranks(xs), &ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    /// Observed mean of `a - b`.
    pub mean_diff: f64,
    /// 95th percentile of the bootstrap distribution of the mean difference.
    pub upper95: f64,
    /// Fraction of resamples with mean difference `>= 0`.
    pub p_value: f64,
    pub resamples: usize,
}

impl PairedBootstrap {
    /// One-sided test of `mean(a) < mean(b)` at 95%.
    pub fn a_less_than_b(&self) -> bool {
        self.upper95 < 0.0
    }
}

/// Paired bootstrap of `mean(a - b)` with a fixed sub-seed.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, root_seed: u64) -> PairedBootstrap {
    assert_eq!(a.len(), b.len(), "paired samples need equal length");
    assert!(!a.is_empty(), "paired bootstrap needs data");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = seed::rng(seed::derive(root_seed, seed::stream::BOOTSTRAP, n as u64));
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(f64::total_cmp);
    let nonneg = means.iter().filter(|m| **m >= 0.0).count();
    let q = ((0.95 * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    PairedBootstrap { mean_diff, upper95: means[q], p_value: nonneg as f64 / resamples as f64, resamples }
}
