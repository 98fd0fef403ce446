//! Periodic scoring of recent articles and the JSON feed built from it.

pub mod service;

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use self::service::{router, run_service, AppState, Clock, Health, ServiceConfig, SystemClock};
use crate::error::Result;
use crate::ingest::Matching;
use crate::models::{Forecaster, ModelFile};
use crate::store::Store;
use crate::timeseries::build_series;

/// Coverage of the reported prediction intervals.
pub const INTERVAL_COVERAGE: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub article_id: String,
    pub article_url: String,
    pub title: String,
    pub publisher: String,
    pub published_at: DateTime<Utc>,
    pub observed_mentions: u64,
    pub predicted_24h: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub rank: usize,
}

/// Observed cumulative series and its forecast continuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleSeries {
    pub t0: DateTime<Utc>,
    pub observed: Vec<u64>,
    pub predicted: Vec<f64>,
    pub interval_lo: Vec<f64>,
    pub interval_hi: Vec<f64>,
}

/// Result of one scoring pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub generated_at: DateTime<Utc>,
    pub entries: Vec<RankedEntry>,
    pub series: BTreeMap<String, ArticleSeries>,
}

impl Snapshot {
    pub fn empty(generated_at: DateTime<Utc>) -> Self {
        Snapshot {
            generated_at,
            entries: Vec::new(),
            series: BTreeMap::new(),
        }
    }
}

/// Stable identifier of an article: the first 16 hex digits of the SHA-256
/// of its canonical URL, title and publication time.
pub fn article_id(m: &Matching) -> String {
    let mut h = Sha256::new();
    h.update(m.article.canonical_url.as_bytes());
    h.update([0]);
    h.update(m.article.title.as_bytes());
    h.update([0]);
    h.update(m.article.published_at.to_rfc3339().as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn score_one(m: &Matching, file: &ModelFile, now: DateTime<Utc>) -> Result<(RankedEntry, ArticleSeries)> {
    let step = file.step_secs;
    let horizon_end = m.t0() + Duration::seconds(step * file.horizon_steps as i64);
    let observed_mentions = m
        .mentions
        .iter()
        .filter(|x| x.published_at <= now.min(horizon_end))
        .count() as u64;
    let t1 = now.min(horizon_end);
    let observed = if t1 > m.t0() {
        build_series(m, t1, step)?.cumulative
    } else {
        Vec::new()
    };

    let mut series = ArticleSeries {
        t0: m.t0(),
        observed: observed.clone(),
        predicted: Vec::new(),
        interval_lo: Vec::new(),
        interval_hi: Vec::new(),
    };
    let (predicted, interval) = if now >= horizon_end {
        (Some(observed_mentions as f64), None)
    } else if observed.is_empty() {
        (None, None)
    } else {
        let (ts, pad) = crate::models::pad_history(observed.iter().map(|&v| v as f64).collect(), file.model.min_history());
        let statics = if file.model.n_static().is_some() {
            file.features.statics(&m.article)
        } else {
            Vec::new()
        };
        let f = file
            .model
            .forecast_with_interval(&ts, &statics, file.horizon_steps + pad, INTERVAL_COVERAGE)?;
        let last = *ts.last().unwrap();
        series.predicted = f.values.clone();
        if let Some(iv) = &f.intervals {
            series.interval_lo = iv.iter().map(|p| p.0).collect();
            series.interval_hi = iv.iter().map(|p| p.1).collect();
        }
        (
            Some(f.final_value(last)),
            f.intervals.and_then(|iv| iv.last().copied()),
        )
    };
    Ok((
        RankedEntry {
            article_id: article_id(m),
            article_url: m.article.canonical_url.clone(),
            title: m.article.title.clone(),
            publisher: m.article.publisher.clone(),
            published_at: m.t0(),
            observed_mentions,
            predicted_24h: predicted,
            interval,
            rank: 0,
        },
        series,
    ))
}

/// Score every article published in `[now - horizon, now]`. Entries are
/// ranked by predicted value (articles without a prediction last), then by
/// observed mentions, then by URL. The store is only read.
pub fn scoring_pass(store: &Store, file: &ModelFile, now: DateTime<Utc>) -> Result<Snapshot> {
    file.validate()?;
    let horizon = Duration::seconds(file.step_secs * file.horizon_steps as i64);
    let recent: Vec<&Matching> = store
        .matchings
        .iter()
        .filter(|m| m.t0() <= now && m.t0() >= now - horizon)
        .collect();
    let scored: Vec<(RankedEntry, ArticleSeries)> = recent
        .par_iter()
        .map(|m| score_one(m, file, now))
        .collect::<Result<_>>()?;

    let mut pairs = scored;
    pairs.sort_by(|(a, _), (b, _)| {
        let by_pred = match (a.predicted_24h, b.predicted_24h) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_pred
            .then(b.observed_mentions.cmp(&a.observed_mentions))
            .then(a.article_url.cmp(&b.article_url))
            .then(a.article_id.cmp(&b.article_id))
    });
    let mut snapshot = Snapshot::empty(now);
    for (i, (mut entry, series)) in pairs.into_iter().enumerate() {
        entry.rank = i + 1;
        snapshot.series.insert(entry.article_id.clone(), series);
        snapshot.entries.push(entry);
    }
    Ok(snapshot)
}
