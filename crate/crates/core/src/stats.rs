//! Small order-statistics helpers shared by the forest intervals, the
//! bootstrap harness and training-set balancing.

use serde::{Deserialize, Serialize};

/// Nearest-rank percentile of an ascending slice: the element at rank
/// `ceil(p * n)` (1-based), clamped to `[1, n]`.
///
/// Panics if `sorted` is empty.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    sorted[nearest_rank_index(sorted.len(), p)]
}

/// Zero-based index used by [`nearest_rank`].
pub fn nearest_rank_index(n: usize, p: f64) -> usize {
    assert!(n > 0, "percentile of an empty sample");
    // 1e-9 guards products such as 0.95 * 100 landing a hair above 95.
    let rank = (p * n as f64 - 1e-9).ceil() as i64;
    rank.clamp(1, n as i64) as usize - 1
}

/// Sorted copy of `values` under `total_cmp`.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Central interval of a sample with the given coverage, e.g. 0.95 gives the
/// 2.5th and 97.5th nearest-rank percentiles.
pub fn central_interval(values: &[f64], coverage: f64) -> (f64, f64) {
    let s = sorted(values);
    let tail = (1.0 - coverage) / 2.0;
    (nearest_rank(&s, tail), nearest_rank(&s, 1.0 - tail))
}

/// Summary of a bootstrap distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    /// Mean of the replicate values.
    pub point: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

impl Quantiles {
    pub fn from_replicates(values: &[f64]) -> Self {
        let s = sorted(values);
        Quantiles {
            point: values.iter().sum::<f64>() / values.len() as f64,
            q025: nearest_rank(&s, 0.025),
            q50: nearest_rank(&s, 0.5),
            q975: nearest_rank(&s, 0.975),
        }
    }

    pub fn overlaps(&self, other: &Quantiles) -> bool {
        self.q025 <= other.q975 && other.q025 <= self.q975
    }

    pub fn contains(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}
