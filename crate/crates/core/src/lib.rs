//! Links news articles to the tweets that mention them, turns mention streams
//! into hourly cumulative series and forecasts each article's mention count
//! 24 hours after publication.
//!
//! The crate is organised bottom-up:
//!
//! * [`ingest`] parses article/tweet/matching records, canonicalises URLs,
//!   merges duplicate article entries and filters bad publication times.
//! * [`timeseries`] builds cumulative mention series, targets and lifespans.
//! * [`features`] extracts time-series, content and context features.
//! * [`models`] holds the four forecasters (linear extrapolation baseline,
//!   linear AR, random-forest AR and a GRU sequence-to-sequence network).
//! * [`eval`] scores forecasts with MAPE and NDCG@k under bootstrap.
//! * [`synth`] generates synthetic corpora with saturating cascades.
//! * [`serve`] runs periodic scoring passes and serves the ranked feed.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod serve;
pub mod stats;
pub mod store;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalReport};
pub use features::{FeatureExtractor, FeatureVector, KeywordMap, PublisherList};
pub use ingest::{Article, Matching, Mention, Tweet};
pub use models::{Forecast, ForecastModel, Forecaster, ModelFile};
pub use store::Store;
pub use timeseries::{Horizon, MentionSeries};



