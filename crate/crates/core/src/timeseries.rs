//! Hourly cumulative mention series, prediction targets and lifespans.
//!
//! Buckets are half-open, `[t0 + (k-1)d, t0 + kd)`, so `f_k` counts the
//! mentions strictly before `t0 + kd`. The target interval `[t0, t0 + delta]`
//! is closed on the right. Mentions clamped to `t0` during ingestion fall in
//! the first bucket.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Matching;

pub const HOUR_SECS: i64 = 3600;
pub const DEFAULT_DELTA_SECS: i64 = 24 * HOUR_SECS;

/// Cumulative mention counts `f_1..f_K` anchored at publication time `t0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSeries {
    pub t0: DateTime<Utc>,
    pub step_secs: i64,
    pub cumulative: Vec<u64>,
}

impl MentionSeries {
    /// Number of complete steps `K`.
    pub fn steps(&self) -> usize {
        self.cumulative.len()
    }

    pub fn last(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.cumulative.iter().map(|&c| c as f64).collect()
    }
}

/// Prediction horizon `delta` split into `steps` buckets of `step_secs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub delta_secs: i64,
    pub step_secs: i64,
    pub steps: usize,
}

impl Horizon {
    pub fn new(delta_secs: i64, step_secs: i64) -> Result<Self> {
        if step_secs <= 0 || delta_secs <= 0 || delta_secs % step_secs != 0 {
            return Err(Error::Domain(format!(
                "horizon {delta_secs}s is not a positive multiple of step {step_secs}s"
            )));
        }
        Ok(Horizon {
            delta_secs,
            step_secs,
            steps: (delta_secs / step_secs) as usize,
        })
    }

    pub fn delta(&self) -> Duration {
        Duration::seconds(self.delta_secs)
    }

    /// Whether the whole target interval of `matching` has been observed.
    pub fn is_mature(&self, matching: &Matching, observed_until: DateTime<Utc>) -> bool {
        observed_until >= matching.t0() + self.delta()
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            delta_secs: DEFAULT_DELTA_SECS,
            step_secs: HOUR_SECS,
            steps: 24,
        }
    }
}

/// Mention offsets in seconds from `t0`, clamped at zero, ascending.
fn sorted_offsets(matching: &Matching) -> Vec<i64> {
    let t0 = matching.t0().timestamp();
    let mut v: Vec<i64> = matching
        .mentions
        .iter()
        .map(|m| (m.published_at.timestamp() - t0).max(0))
        .collect();
    v.sort_unstable();
    v
}

/// Series of all complete steps up to `t1`.
pub fn build_series(matching: &Matching, t1: DateTime<Utc>, step_secs: i64) -> Result<MentionSeries> {
    let t0 = matching.t0();
    if t1 <= t0 {
        return Err(Error::Domain(format!(
            "series end {t1} is not after publication {t0}"
        )));
    }
    if step_secs <= 0 {
        return Err(Error::Domain(format!("non-positive step {step_secs}s")));
    }
    let steps = ((t1 - t0).num_seconds() / step_secs) as usize;
    let mut per_bucket = vec![0u64; steps];
    for off in sorted_offsets(matching) {
        let bucket = (off / step_secs) as usize;
        if bucket >= steps {
            break;
        }
        per_bucket[bucket] += 1;
    }
    let mut acc = 0u64;
    let cumulative = per_bucket
        .into_iter()
        .map(|c| {
            acc += c;
            acc
        })
        .collect();
    Ok(MentionSeries {
        t0,
        step_secs,
        cumulative,
    })
}

/// Mentions in `[t0, t0 + delta]`. Fails with [`Error::NotMature`] when the
/// observation horizon ends before `t0 + delta`.
pub fn target_mentions(
    matching: &Matching,
    delta_secs: i64,
    observed_until: DateTime<Utc>,
) -> Result<u64> {
    let end = matching.t0() + Duration::seconds(delta_secs);
    if observed_until < end {
        return Err(Error::NotMature(matching.article.canonical_url.clone()));
    }
    Ok(matching
        .mentions
        .iter()
        .filter(|m| m.published_at <= end)
        .count() as u64)
}

/// Smallest elapsed time after which the article has at least
/// `fraction * total` of its mentions.
pub fn lifespan(matching: &Matching, fraction: f64) -> Result<Duration> {
    if matching.mentions.is_empty() {
        return Err(Error::Domain(format!(
            "{} has no mentions, lifespan undefined",
            matching.article.canonical_url
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("fraction {fraction} outside (0, 1]")));
    }
    let offsets = sorted_offsets(matching);
    let needed = ((fraction * offsets.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(Duration::seconds(offsets[needed.min(offsets.len()) - 1]))
}

/// Histogram of 90% lifespans, in whole hours (`floor`), over articles with at
/// least `min_mentions` mentions.
pub fn lifespan_histogram<'a>(
    matchings: impl IntoIterator<Item = &'a Matching>,
    min_mentions: usize,
) -> BTreeMap<u64, usize> {
    let mut hist = BTreeMap::new();
    for m in matchings {
        if m.mentions.is_empty() || m.mentions.len() < min_mentions {
            continue;
        }
        if let Ok(span) = lifespan(m, 0.9) {
            *hist.entry((span.num_seconds() / HOUR_SECS) as u64).or_insert(0) += 1;
        }
    }
    hist
}
