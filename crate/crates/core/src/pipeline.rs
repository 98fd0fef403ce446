//! End-to-end steps shared by the command-line tool and the integration
//! tests: ingest records into a store, train a model file, evaluate.

use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{balance_training_set, bootstrap_eval, mature_targets, EvalConfig, EvalReport};
use crate::features::{FeatureConfig, FeatureExtractor, KeywordMap, PublisherList};
use crate::ingest::{
    assemble_matchings, load_records_from_path, merge_matchings, retain_in_window, Article,
    ArticleRecord, Matching, MatchingRecord, PublicationWindow, Tweet, TweetRecord,
};
use crate::models::{
    linear_ar_fit, make_ar_samples, rf_fit, s2s_train, BaselineModel, ForecastModel, ForestOptions,
    ModelFile, Seq2SeqConfig, Seq2SeqExample, Seq2SeqModel, TrainSchedule,
};
use crate::store::{IngestStats, Store, StoreMeta, STORE_SCHEMA_VERSION};
use crate::synth::{ARTICLES_FILE, MATCHINGS_FILE, TWEETS_FILE};
use crate::timeseries::{build_series, Horizon};

/// Default share of (chronologically latest) articles held out for validation.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 1.0 / 6.0;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Overrides the default `[first tweet - 7 d, last tweet + 300 s]`.
    pub window: Option<PublicationWindow>,
    /// Overrides the default of the latest tweet time.
    pub observed_until: Option<DateTime<Utc>>,
}

/// Clean raw records into a store: canonicalise, assemble, merge duplicate
/// articles, and drop articles outside the publication window.
pub fn ingest_records(
    articles: Vec<ArticleRecord>,
    tweets: Vec<TweetRecord>,
    matchings: Vec<MatchingRecord>,
    options: &IngestOptions,
) -> Result<Store> {
    let mut stats = IngestStats {
        article_records: articles.len(),
        tweet_records: tweets.len(),
        matching_records: matchings.len(),
        ..Default::default()
    };
    let mut parsed = Vec::with_capacity(articles.len());
    for r in articles {
        match Article::from_record(r) {
            Ok(a) => parsed.push(a),
            Err(e) => {
                log::warn!("skipping article: {e}");
                stats.invalid_articles += 1;
            }
        }
    }
    let tweets: Vec<Tweet> = tweets.into_iter().map(Tweet::from).collect();
    let first_tweet = tweets.iter().map(|t| t.published_at).min();
    let last_tweet = tweets.iter().map(|t| t.published_at).max();

    let (assembled, a) = assemble_matchings(parsed, tweets, &matchings);
    stats.duplicate_article_records = a.duplicate_article_records;
    stats.duplicate_tweet_records = a.duplicate_tweet_records;
    stats.unknown_article_refs = a.unknown_article_refs;
    stats.unknown_tweet_refs = a.unknown_tweet_refs;
    stats.clamped_mentions = a.clamped_mentions;
    stats.dropped_early_mentions = a.dropped_early_mentions;
    stats.assembled = assembled.len();

    let merged = merge_matchings(assembled);
    stats.merged_away = stats.assembled - merged.len();

    let window = match (options.window, first_tweet, last_tweet) {
        (Some(w), _, _) => Some(w),
        (None, Some(first), Some(last)) => Some(PublicationWindow::around(first, last)?),
        _ => {
            log::warn!("no tweets and no explicit window: publication times are not filtered");
            None
        }
    };
    let before = merged.len();
    let kept = match &window {
        Some(w) => retain_in_window(merged, w),
        None => merged,
    };
    stats.out_of_window = before - kept.len();
    stats.articles = kept.len();
    stats.mentions = kept.iter().map(|m| m.mentions.len()).sum();

    let observed_until = options
        .observed_until
        .or(last_tweet)
        .or_else(|| kept.iter().map(|m| m.t0()).max())
        .unwrap_or(DateTime::UNIX_EPOCH);
    Ok(Store {
        meta: StoreMeta {
            schema_version: STORE_SCHEMA_VERSION,
            observed_until,
            window,
            stats,
        },
        matchings: kept,
    })
}

/// [`ingest_records`] over three JSONL files.
pub fn ingest_files(
    articles: impl AsRef<Path>,
    tweets: impl AsRef<Path>,
    matchings: impl AsRef<Path>,
    options: &IngestOptions,
) -> Result<Store> {
    let a = load_records_from_path::<ArticleRecord>(articles)?;
    let t = load_records_from_path::<TweetRecord>(tweets)?;
    let m = load_records_from_path::<MatchingRecord>(matchings)?;
    let skipped = a.skipped + t.skipped + m.skipped;
    let mut store = ingest_records(a.records, t.records, m.records, options)?;
    store.meta.stats.skipped_lines = skipped;
    Ok(store)
}

/// [`ingest_files`] over a directory written by the synthetic generator.
pub fn ingest_dir(dir: impl AsRef<Path>, options: &IngestOptions) -> Result<Store> {
    let dir = dir.as_ref();
    ingest_files(
        dir.join(ARTICLES_FILE),
        dir.join(TWEETS_FILE),
        dir.join(MATCHINGS_FILE),
        options,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Baseline { window: usize },
    LinearAr { order: usize },
    Rf { order: usize, options: ForestOptions },
    S2s { config: Seq2SeqConfig, schedule: TrainSchedule, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub model: ModelSpec,
    pub features: FeatureConfig,
    pub horizon: Horizon,
    /// Train on the stratified subset rather than on every mature article.
    pub balance: bool,
    pub seed: u64,
}

impl TrainOptions {
    pub fn new(model: ModelSpec, seed: u64) -> Self {
        TrainOptions {
            model,
            features: FeatureConfig::default(),
            horizon: Horizon::default(),
            balance: true,
            seed,
        }
    }
}

/// Full-horizon series and static features of each selected training article.
pub struct TrainingSet {
    pub series: Vec<Vec<u64>>,
    pub statics: Vec<Vec<f64>>,
}

/// Mature training articles (balanced if requested) as full-horizon series.
pub fn training_set(
    training: &[Matching],
    observed_until: DateTime<Utc>,
    extractor: &FeatureExtractor,
    horizon: &Horizon,
    balance: bool,
    seed: u64,
) -> Result<TrainingSet> {
    let mature = mature_targets(training, horizon, observed_until);
    if mature.is_empty() {
        return Err(Error::Corpus("no mature training articles".into()));
    }
    let chosen: Vec<usize> = if balance {
        let targets: Vec<u64> = mature.iter().map(|m| m.1).collect();
        balance_training_set(&targets, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else {
        (0..mature.len()).collect()
    };
    let mut set = TrainingSet {
        series: Vec::with_capacity(chosen.len()),
        statics: Vec::with_capacity(chosen.len()),
    };
    for i in chosen {
        let m = mature[i].0;
        let s = build_series(m, m.t0() + Duration::seconds(horizon.delta_secs), horizon.step_secs)?;
        set.series.push(s.cumulative);
        set.statics.push(extractor.statics(&m.article));
    }
    Ok(set)
}

/// Fit the feature extractor and the requested model on `training`.
pub fn train_model(training: &[Matching], observed_until: DateTime<Utc>, options: &TrainOptions) -> Result<ModelFile> {
    let extractor = match options.model {
        ModelSpec::Baseline { .. } => FeatureExtractor {
            keywords: KeywordMap::new(Default::default())?,
            publishers: PublisherList::new(Vec::new())?,
        },
        _ => FeatureExtractor::fit(&options.features, training)?,
    };
    let model = match &options.model {
        ModelSpec::Baseline { window } => ForecastModel::Baseline(BaselineModel::new(*window)?),
        spec => {
            let set = training_set(
                training,
                observed_until,
                &extractor,
                &options.horizon,
                options.balance,
                options.seed,
            )?;
            log::info!("training on {} articles", set.series.len());
            match spec {
                ModelSpec::LinearAr { order } => {
                    ForecastModel::LinearAr(linear_ar_fit(&ar_samples(&set, *order), *order)?)
                }
                ModelSpec::Rf { order, options } => {
                    ForecastModel::Rf(rf_fit(&ar_samples(&set, *order), *order, options.clone())?)
                }
                ModelSpec::S2s { config, schedule, seed } => {
                    let mut model = Seq2SeqModel::new(
                        config.clone(),
                        extractor.n_static(),
                        options.horizon.steps,
                        *seed,
                    );
                    let examples: Vec<Seq2SeqExample> = set
                        .series
                        .into_iter()
                        .zip(set.statics)
                        .map(|(series, statics)| Seq2SeqExample { series, statics })
                        .collect();
                    s2s_train(&mut model, &examples, schedule, *seed)?;
                    ForecastModel::S2s(model)
                }
                ModelSpec::Baseline { .. } => unreachable!(),
            }
        }
    };
    ModelFile::new(model, extractor, options.horizon)
}

fn ar_samples(set: &TrainingSet, order: usize) -> Vec<crate::models::ArSample> {
    set.series
        .iter()
        .zip(&set.statics)
        .flat_map(|(s, st)| make_ar_samples(s, order, st))
        .collect()
}

/// Evaluate named model files on the validation part of `store`.
pub fn evaluate_store(
    store: &Store,
    validation_fraction: f64,
    models: &[(String, &ModelFile)],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let (_, validation) = store.split(validation_fraction)?;
    bootstrap_eval(validation, store.meta.observed_until, models, config)
}
