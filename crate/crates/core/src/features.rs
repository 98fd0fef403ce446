//! Model inputs: cumulative time-series features, binary content features
//! (cryptocurrency keywords in the title) and binary context features (one of
//! the top publishers).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Article, Matching};
use crate::timeseries::{build_series, MentionSeries};

pub const DEFAULT_TOP_PUBLISHERS: usize = 10;

const DEFAULT_CONFIG: &str = include_str!("../assets/default_features.json");

/// Concept -> keywords. Concepts are kept in name order, which fixes the bit
/// order of content features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct KeywordMap {
    concepts: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    tokenized: Vec<Vec<Vec<String>>>,
}

impl KeywordMap {
    pub fn new(concepts: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut tokenized = Vec::with_capacity(concepts.len());
        for (concept, keywords) in &concepts {
            let toks: Vec<Vec<String>> = keywords
                .iter()
                .map(|k| tokenize(k))
                .filter(|t| !t.is_empty())
                .collect();
            if toks.is_empty() {
                return Err(Error::Config(format!("concept {concept:?} has no keywords")));
            }
            tokenized.push(toks);
        }
        Ok(KeywordMap {
            concepts,
            tokenized,
        })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.concepts.iter().map(|(c, k)| (c.as_str(), k.as_slice()))
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for KeywordMap {
    type Error = Error;

    fn try_from(value: BTreeMap<String, Vec<String>>) -> Result<Self> {
        KeywordMap::new(value)
    }
}

impl From<KeywordMap> for BTreeMap<String, Vec<String>> {
    fn from(value: KeywordMap) -> Self {
        value.concepts
    }
}

/// Lowercased alphanumeric tokens; punctuation acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    phrase.len() <= tokens.len() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Bit `c` is set iff a keyword of concept `c` occurs in the title as a whole
/// token (or token sequence), case-insensitively.
pub fn content_features(article: &Article, map: &KeywordMap) -> Vec<bool> {
    let tokens = tokenize(&article.title);
    map.tokenized
        .iter()
        .map(|phrases| phrases.iter().any(|p| contains_phrase(&tokens, p)))
        .collect()
}

/// Ordered list of top publisher hosts; `None` entries are padding that
/// matches nothing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherList {
    hosts: Vec<Option<String>>,
}

impl PublisherList {
    pub fn new(hosts: Vec<Option<String>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for h in hosts.iter().flatten() {
            if !seen.insert(h) {
                return Err(Error::Config(format!("duplicate publisher {h:?}")));
            }
        }
        Ok(PublisherList { hosts })
    }

    pub fn len(&self) -> usize {
        self.hosts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hosts.is_empty()
    }

    pub fn hosts(&self) -> &[Option<String>] {
        &self.hosts
    }

    pub fn position(&self, host: &str) -> Option<usize> {
        self.hosts.iter().position(|h| h.as_deref() == Some(host))
    }
}

/// The `n` publishers with the most mentions in `training`, ties broken by
/// host name. Padded with sentinels when fewer than `n` publishers exist.
pub fn top_publishers<'a>(
    training: impl IntoIterator<Item = &'a Matching>,
    n: usize,
) -> Result<PublisherList> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut any = false;
    for m in training {
        any = true;
        *counts.entry(m.article.publisher.as_str()).or_default() += m.mentions.len() as u64;
    }
    if !any {
        return Err(Error::Domain("cannot rank publishers of an empty training set".into()));
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut hosts: Vec<Option<String>> = ranked
        .into_iter()
        .take(n)
        .map(|(h, _)| Some(h.to_owned()))
        .collect();
    hosts.resize(n, None);
    PublisherList::new(hosts)
}

/// One-hot position of the article's publisher, or all zeros.
pub fn context_features(article: &Article, publishers: &PublisherList) -> Vec<bool> {
    publishers
        .hosts
        .iter()
        .map(|h| h.as_deref() == Some(article.publisher.as_str()))
        .collect()
}

/// `f_k` for every complete step before `t1`.
pub fn time_series_features(series: &MentionSeries, t1: DateTime<Utc>) -> Result<Vec<u64>> {
    let elapsed = (t1 - series.t0).num_seconds();
    let complete = if elapsed < 0 {
        0
    } else {
        (elapsed / series.step_secs) as usize
    };
    if complete == 0 {
        return Err(Error::Domain(format!(
            "no complete {}s step between {} and {t1}",
            series.step_secs, series.t0
        )));
    }
    if complete > series.steps() {
        return Err(Error::Input(format!(
            "series has {} steps but {complete} requested",
            series.steps()
        )));
    }
    Ok(series.cumulative[..complete].to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ts: Vec<u64>,
    pub k: usize,
    pub content: Vec<bool>,
    pub context: Vec<bool>,
}

impl FeatureVector {
    pub fn ts_f64(&self) -> Vec<f64> {
        self.ts.iter().map(|&v| v as f64).collect()
    }

    /// Content then context bits as 0/1 reals.
    pub fn statics(&self) -> Vec<f64> {
        self.content
            .iter()
            .chain(&self.context)
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Feature configuration file: `{"keywords": {...}, "n_top_publishers": 10}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub keywords: KeywordMap,
    #[serde(default = "default_top")]
    pub n_top_publishers: usize,
}

fn default_top() -> usize {
    DEFAULT_TOP_PUBLISHERS
}

impl FeatureConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled feature config is valid")
    }
}

/// Immutable keyword map plus publisher list, fixed at training time and
/// stored inside model files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub keywords: KeywordMap,
    pub publishers: PublisherList,
}

impl FeatureExtractor {
    pub fn fit<'a>(
        config: &FeatureConfig,
        training: impl IntoIterator<Item = &'a Matching>,
    ) -> Result<Self> {
        Ok(FeatureExtractor {
            keywords: config.keywords.clone(),
            publishers: top_publishers(training, config.n_top_publishers)?,
        })
    }

    pub fn n_static(&self) -> usize {
        self.keywords.len() + self.publishers.len()
    }

    pub fn statics(&self, article: &Article) -> Vec<f64> {
        content_features(article, &self.keywords)
            .into_iter()
            .chain(context_features(article, &self.publishers))
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    /// Feature vector of `matching` as seen at `t1`.
    pub fn extract(&self, matching: &Matching, t1: DateTime<Utc>, step_secs: i64) -> Result<FeatureVector> {
        let series = build_series(matching, t1, step_secs)?;
        let ts = time_series_features(&series, t1)?;
        Ok(FeatureVector {
            k: ts.len(),
            ts,
            content: content_features(&matching.article, &self.keywords),
            context: context_features(&matching.article, &self.publishers),
        })
    }
}
