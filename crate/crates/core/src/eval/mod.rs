//! MAPE and NDCG@k under bootstrap resampling, plus training-set balancing.

mod balance;
mod metrics;

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::balance::balance_training_set;
pub use self::metrics::{mape, ndcg_at_k};
use crate::error::{Error, Result};
use crate::ingest::Matching;
use crate::models::{ForecastModel, Forecaster, ModelFile};
use crate::stats::Quantiles;
use crate::timeseries::{target_mentions, Horizon, HOUR_SECS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub start_hours: Vec<u32>,
    pub horizon: Horizon,
    pub k_top: usize,
    pub n_bootstrap: usize,
    pub bootstrap_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            start_hours: vec![5, 10, 15, 20],
            horizon: Horizon::default(),
            k_top: 100,
            n_bootstrap: 100,
            bootstrap_size: 2000,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start_hours.is_empty() {
            return Err(Error::Config("no start times".into()));
        }
        for &h in &self.start_hours {
            let secs = h as i64 * HOUR_SECS;
            if h == 0 || secs >= self.horizon.delta_secs || secs % self.horizon.step_secs != 0 {
                return Err(Error::Config(format!(
                    "start time {h} h must be a positive whole number of steps before the horizon"
                )));
            }
        }
        if self.k_top == 0 || self.k_top > self.bootstrap_size {
            return Err(Error::Config(format!(
                "k_top {} must be in 1..={}",
                self.k_top, self.bootstrap_size
            )));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::Config("need at least one bootstrap resample".into()));
        }
        Ok(())
    }
}

/// Metrics of one model at one start time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartTimeResult {
    pub start_hours: u32,
    pub mape: Quantiles,
    pub ndcg: Quantiles,
    pub mape_replicates: Vec<f64>,
    pub ndcg_replicates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    pub results: Vec<StartTimeResult>,
}

impl ModelEval {
    pub fn at(&self, start_hours: u32) -> Option<&StartTimeResult> {
        self.results.iter().find(|r| r.start_hours == start_hours)
    }
}

/// Columns ready for plotting metric against start time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotArrays {
    pub start_hours: Vec<u32>,
    pub mape: Vec<f64>,
    pub mape_lo: Vec<f64>,
    pub mape_hi: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub ndcg_lo: Vec<f64>,
    pub ndcg_hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub n_validation: usize,
    pub models: Vec<ModelEval>,
    pub plots: BTreeMap<String, PlotArrays>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelEval> {
        self.models.iter().find(|m| m.model == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Short display name such as `rf(3, 500)`.
pub fn model_name(model: &ForecastModel) -> String {
    match model {
        ForecastModel::Baseline(m) => format!("baseline({})", m.window),
        ForecastModel::LinearAr(m) => format!("linear_ar({})", m.order),
        ForecastModel::Rf(m) => format!("rf({}, {})", m.order, m.trees.len()),
        ForecastModel::S2s(m) => format!("s2s({})", m.config.hidden),
    }
}

/// Mature validation articles paired with their targets.
pub fn mature_targets<'a>(
    matchings: &'a [Matching],
    horizon: &Horizon,
    observed_until: DateTime<Utc>,
) -> Vec<(&'a Matching, u64)> {
    matchings
        .iter()
        .filter_map(|m| {
            target_mentions(m, horizon.delta_secs, observed_until)
                .ok()
                .map(|t| (m, t))
        })
        .collect()
}

/// Final-step forecast for `matching` as seen `start_hours` after publication.
/// Histories shorter than the model needs are left-padded with zeros.
pub fn forecast_target(file: &ModelFile, matching: &Matching, start_hours: u32) -> Result<f64> {
    let t1 = matching.t0() + Duration::hours(start_hours as i64);
    let fv = file.features.extract(matching, t1, file.step_secs)?;
    let (ts, pad) = crate::models::pad_history(fv.ts_f64(), file.model.min_history());
    let last = ts.last().copied().unwrap_or(0.0);
    let statics = file.features.statics(&matching.article);
    let statics = if file.model.n_static().is_some() { statics } else { Vec::new() };
    Ok(file
        .model
        .forecast(&ts, &statics, file.horizon_steps + pad)?
        .final_value(last))
}

/// Per-replicate index lists: replicate `r` draws `size` indices with
/// replacement from its own RNG stream, so every model and start time is
/// scored on the same resamples.
pub fn resample_indices(n: usize, size: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..count)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..size).map(|_| rng.random_range(0..n)).collect()
        })
        .collect()
}

/// MAPE over the top `k_top` actuals (positive ones only) and NDCG@k_top over
/// the whole resample, for each resample.
pub fn bootstrap_metrics(
    pairs: &[(f64, f64)],
    resamples: &[Vec<usize>],
    k_top: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let per: Vec<Result<(f64, f64)>> = resamples
        .par_iter()
        .map(|idx| {
            let mut sample: Vec<(f64, f64)> = idx.iter().map(|&i| pairs[i]).collect();
            let ndcg = ndcg_at_k(&sample, k_top)?;
            sample.sort_by(|a, b| b.0.total_cmp(&a.0));
            sample.truncate(k_top);
            sample.retain(|p| p.0 > 0.0);
            Ok((mape(&sample)?, ndcg))
        })
        .collect();
    let mut mapes = Vec::with_capacity(per.len());
    let mut ndcgs = Vec::with_capacity(per.len());
    for r in per {
        let (m, n) = r?;
        mapes.push(m);
        ndcgs.push(n);
    }
    Ok((mapes, ndcgs))
}

/// Score every model at every start time on shared bootstrap resamples of
/// the mature validation articles.
pub fn bootstrap_eval(
    validation: &[Matching],
    observed_until: DateTime<Utc>,
    models: &[(String, &ModelFile)],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let mature = mature_targets(validation, &config.horizon, observed_until);
    if mature.len() < config.bootstrap_size {
        return Err(Error::Corpus(format!(
            "{} mature validation articles, bootstrap needs {}",
            mature.len(),
            config.bootstrap_size
        )));
    }
    let resamples = resample_indices(mature.len(), config.bootstrap_size, config.n_bootstrap, config.seed);

    let mut report = EvalReport {
        config: config.clone(),
        n_validation: mature.len(),
        models: Vec::new(),
        plots: BTreeMap::new(),
    };
    for (name, file) in models {
        let mut eval = ModelEval {
            model: name.clone(),
            results: Vec::new(),
        };
        let mut plot = PlotArrays::default();
        for &h in &config.start_hours {
            let pairs: Vec<(f64, f64)> = mature
                .par_iter()
                .map(|(m, target)| Ok((*target as f64, forecast_target(file, m, h)?)))
                .collect::<Result<_>>()?;
            let (mapes, ndcgs) = bootstrap_metrics(&pairs, &resamples, config.k_top)?;
            let result = StartTimeResult {
                start_hours: h,
                mape: Quantiles::from_replicates(&mapes),
                ndcg: Quantiles::from_replicates(&ndcgs),
                mape_replicates: mapes,
                ndcg_replicates: ndcgs,
            };
            log::info!(
                "{name} at {h} h: MAPE {:.4} [{:.4}, {:.4}], NDCG {:.4} [{:.4}, {:.4}]",
                result.mape.point,
                result.mape.q025,
                result.mape.q975,
                result.ndcg.point,
                result.ndcg.q025,
                result.ndcg.q975
            );
            plot.start_hours.push(h);
            plot.mape.push(result.mape.point);
            plot.mape_lo.push(result.mape.q025);
            plot.mape_hi.push(result.mape.q975);
            plot.ndcg.push(result.ndcg.point);
            plot.ndcg_lo.push(result.ndcg.q025);
            plot.ndcg_hi.push(result.ndcg.q975);
            eval.results.push(result);
        }
        report.plots.insert(name.clone(), plot);
        report.models.push(eval);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_scores() {
        let pairs: Vec<(f64, f64)> = (1..=300).map(|i| (i as f64, i as f64)).collect();
        let resamples = resample_indices(pairs.len(), 200, 20, 5);
        let (m, n) = bootstrap_metrics(&pairs, &resamples, 50).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
        assert!(n.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn identical_articles_give_zero_width_intervals() {
        let pairs = vec![(10.0, 7.0); 100];
        let resamples = resample_indices(pairs.len(), 50, 30, 1);
        let (m, n) = bootstrap_metrics(&pairs, &resamples, 10).unwrap();
        let q = Quantiles::from_replicates(&m);
        assert_eq!(q.q025, q.q975);
        assert!((q.point - 0.3).abs() < 1e-12);
        let q = Quantiles::from_replicates(&n);
        assert_eq!(q.q025, q.q975);
    }

    #[test]
    fn quantiles_match_sort_oracle() {
        let pairs: Vec<(f64, f64)> = (0..500)
            .map(|i| ((i % 97 + 1) as f64, ((i * 31) % 113) as f64))
            .collect();
        let resamples = resample_indices(pairs.len(), 300, 100, 9);
        let (m, _) = bootstrap_metrics(&pairs, &resamples, 40).unwrap();
        let q = Quantiles::from_replicates(&m);
        let mut s = m.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // ceil(2.5) = 3, ceil(50) = 50, ceil(97.5) = 98 (1-based).
        assert_eq!((q.q025, q.q50, q.q975), (s[2], s[49], s[97]));
        assert!(s[0] <= q.point && q.point <= s[99]);
    }

    #[test]
    fn resamples_are_reproducible_and_independent_streams() {
        let a = resample_indices(1000, 50, 3, 42);
        assert_eq!(a, resample_indices(1000, 50, 3, 42));
        assert_ne!(a[0], a[1]);
        // Adding replicates does not change earlier ones.
        assert_eq!(a[..3], resample_indices(1000, 50, 5, 42)[..3]);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        let bad = EvalConfig {
            start_hours: vec![24],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvalConfig {
            k_top: 3000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
