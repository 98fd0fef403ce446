//! Synthetic article/tweet/matching corpora with exponentially decaying
//! mention rates, plus injection of the data-quality problems ingestion has
//! to clean up.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_records_to_path, ArticleRecord, MatchingRecord, TweetRecord};

pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const MATCHINGS_FILE: &str = "matchings.jsonl";

const FILLER: &[&str] = &[
    "market", "price", "rally", "report", "analysis", "regulators", "exchange", "traders",
    "investors", "update", "weekly", "surge", "drop", "network", "launch", "fund", "token",
    "mining", "wallet", "outlook", "futures", "volatility", "adoption", "custody", "hackers",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    /// Expected total mentions per article, averaged over the mixture.
    pub amplitude: f64,
    /// Decay timescale of the mention rate, hours.
    pub tau_hours: f64,
    /// Weights of the low / medium / high popularity strata.
    pub mixture: [f64; 3],
    /// Relative amplitude of each stratum before normalisation.
    pub stratum_scales: [f64; 3],
    /// Log-normal spread of per-article amplitude.
    pub amplitude_sigma: f64,
    /// Power-law exponent of publisher frequency by rank.
    pub publisher_skew: f64,
    pub n_publishers: usize,
    /// `(phrase, probability)` of a phrase appearing in a title.
    pub keywords: Vec<(String, f64)>,
    /// Amplitude multiplier for titles containing at least one keyword.
    pub keyword_boost: f64,
    /// Publication times are uniform over `[start, start + span_hours]`.
    pub start: DateTime<Utc>,
    pub span_hours: f64,
    /// Mentions are generated for this many hours after publication.
    pub horizon_hours: u32,
    /// Tweet ids per matching record.
    pub chunk_size: usize,
    pub seed: u64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        let keywords = [
            ("bitcoin", 0.30),
            ("ethereum", 0.15),
            ("ripple", 0.08),
            ("litecoin", 0.05),
            ("bitcoin cash", 0.04),
            ("eos", 0.04),
            ("tether", 0.04),
            ("cardano", 0.03),
            ("monero", 0.03),
            ("dogecoin", 0.03),
        ];
        CascadeParams {
            amplitude: 40.0,
            tau_hours: 4.0,
            mixture: [0.6, 0.3, 0.1],
            stratum_scales: [0.2, 1.0, 6.0],
            amplitude_sigma: 0.5,
            publisher_skew: 1.1,
            n_publishers: 40,
            keywords: keywords.iter().map(|(k, p)| (k.to_string(), *p)).collect(),
            keyword_boost: 1.5,
            start: Utc.with_ymd_and_hms(2018, 12, 1, 0, 0, 0).unwrap(),
            span_hours: 24.0 * 30.0,
            horizon_hours: 48,
            chunk_size: 25,
            seed: 0,
        }
    }
}

impl CascadeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude {} must be positive", self.amplitude)));
        }
        if !(self.tau_hours > 0.0 && self.tau_hours.is_finite()) {
            return Err(Error::Config(format!("tau {} must be positive", self.tau_hours)));
        }
        let total: f64 = self.mixture.iter().sum();
        if self.mixture.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights {:?} must sum to 1", self.mixture)));
        }
        if self.stratum_scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("stratum scales must be positive".into()));
        }
        if self.keywords.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("keyword probabilities must lie in [0, 1]".into()));
        }
        if self.n_publishers == 0 || self.chunk_size == 0 || self.horizon_hours == 0 {
            return Err(Error::Config("publishers, chunk size and horizon must be positive".into()));
        }
        if self.keyword_boost <= 0.0 || self.amplitude_sigma < 0.0 || self.span_hours < 0.0 {
            return Err(Error::Config("invalid boost, sigma or span".into()));
        }
        Ok(())
    }

    /// Expected 90% lifespan of an article, `tau * ln 10`, in hours.
    pub fn expected_lifespan_hours(&self) -> f64 {
        self.tau_hours * 10f64.ln()
    }

    pub fn publisher_hosts(&self) -> Vec<String> {
        (0..self.n_publishers)
            .map(|i| format!("news{i:02}.example.com"))
            .collect()
    }

    fn publisher_cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let weights: Vec<f64> = (0..self.n_publishers)
            .map(|r| ((r + 1) as f64).powf(-self.publisher_skew))
            .collect();
        let total: f64 = weights.iter().sum();
        weights
            .into_iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect()
    }

    /// Per-stratum amplitude multipliers whose mixture mean is 1 once the
    /// keyword boost is averaged in as well.
    fn normalised_scales(&self) -> [f64; 3] {
        let mix: f64 = self.mixture.iter().zip(&self.stratum_scales).map(|(w, s)| w * s).sum();
        let p_none: f64 = self.keywords.iter().map(|(_, p)| 1.0 - p).product();
        let boost_mean = p_none + (1.0 - p_none) * self.keyword_boost;
        let c = 1.0 / (mix * boost_mean);
        [
            self.stratum_scales[0] * c,
            self.stratum_scales[1] * c,
            self.stratum_scales[2] * c,
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub articles: Vec<ArticleRecord>,
    pub tweets: Vec<TweetRecord>,
    pub matchings: Vec<MatchingRecord>,
}

impl SyntheticCorpus {
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_records_to_path(dir.join(ARTICLES_FILE), &self.articles)?;
        write_records_to_path(dir.join(TWEETS_FILE), &self.tweets)?;
        write_records_to_path(dir.join(MATCHINGS_FILE), &self.matchings)
    }
}

struct Generated {
    article: ArticleRecord,
    tweets: Vec<TweetRecord>,
    matchings: Vec<MatchingRecord>,
}

/// Time within one hourly bucket from an exponential with mean `tau`,
/// truncated to `[0, 1)` hours, by inverse CDF. Returns seconds.
fn offset_in_bucket<R: Rng>(rng: &mut R, tau: f64) -> i64 {
    let u: f64 = rng.random();
    let mass = -(-1.0 / tau).exp_m1();
    let hours = -tau * (-u * mass).ln_1p();
    ((hours * 3600.0) as i64).clamp(0, 3599)
}

fn generate_one(i: usize, p: &CascadeParams, scales: &[f64; 3], pub_cdf: &[f64], hosts: &[String]) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(i as u64);

    let offset = (rng.random::<f64>() * p.span_hours * 3600.0) as i64;
    let t0 = p.start + Duration::seconds(offset);

    let u: f64 = rng.random();
    let host = &hosts[pub_cdf.iter().position(|&c| u < c).unwrap_or(hosts.len() - 1)];

    let mut words: Vec<String> = (0..rng.random_range(4..8))
        .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
        .collect();
    let mut has_keyword = false;
    for (phrase, prob) in &p.keywords {
        if rng.random::<f64>() < *prob {
            let at = rng.random_range(0..=words.len());
            words.insert(at, phrase.clone());
            has_keyword = true;
        }
    }
    let mut title = words.join(" ");
    if let Some(c) = title.get_mut(0..1) {
        c.make_ascii_uppercase();
    }
    let url = format!("https://{host}/news/{i}-{}", words[..2].join("-").replace(' ', "-"));

    let w: f64 = rng.random();
    let stratum = if w < p.mixture[0] {
        0
    } else if w < p.mixture[0] + p.mixture[1] {
        1
    } else {
        2
    };
    let z: f64 = StandardNormal.sample(&mut rng);
    let noise = (p.amplitude_sigma * z - p.amplitude_sigma * p.amplitude_sigma / 2.0).exp();
    let boost = if has_keyword { p.keyword_boost } else { 1.0 };
    let amplitude = p.amplitude * scales[stratum] * noise * boost;

    let mut tweets = Vec::new();
    for h in 0..p.horizon_hours {
        let h = h as f64;
        let lambda = amplitude * ((-h / p.tau_hours).exp() - (-(h + 1.0) / p.tau_hours).exp());
        if lambda <= 0.0 || !lambda.is_finite() {
            continue;
        }
        let count = Poisson::new(lambda).map(|d| d.sample(&mut rng) as u64).unwrap_or(0);
        let mut offsets: Vec<i64> = (0..count)
            .map(|_| h as i64 * 3600 + offset_in_bucket(&mut rng, p.tau_hours))
            .collect();
        offsets.sort_unstable();
        for off in offsets {
            let n = tweets.len();
            tweets.push(TweetRecord {
                id: format!("{i}-{n}"),
                user: format!("user{}", rng.random_range(0..50_000)),
                text: format!("{title} {url}"),
                published_at: t0 + Duration::seconds(off),
                links: vec![url.clone()],
            });
        }
    }
    let matchings = tweets
        .chunks(p.chunk_size)
        .map(|c| MatchingRecord {
            article_url: url.clone(),
            tweet_ids: c.iter().map(|t| t.id.clone()).collect(),
        })
        .collect();
    Generated {
        article: ArticleRecord {
            url,
            text: format!("{title}. Coverage from {host}."),
            title,
            published_at: t0,
        },
        tweets,
        matchings,
    }
}

/// Generate `n_articles` articles with Poisson hourly mention counts of mean
/// `A (exp(-h/tau) - exp(-(h+1)/tau))`. Deterministic for a given seed; each
/// article draws from its own RNG stream.
pub fn generate_corpus(n_articles: usize, params: &CascadeParams) -> Result<SyntheticCorpus> {
    if n_articles == 0 {
        return Err(Error::Input("n_articles must be at least 1".into()));
    }
    params.validate()?;
    let scales = params.normalised_scales();
    let cdf = params.publisher_cdf();
    let hosts = params.publisher_hosts();
    let parts: Vec<Generated> = (0..n_articles)
        .into_par_iter()
        .map(|i| generate_one(i, params, &scales, &cdf, &hosts))
        .collect();
    let mut corpus = SyntheticCorpus::default();
    for g in parts {
        corpus.articles.push(g.article);
        corpus.tweets.extend(g.tweets);
        corpus.matchings.extend(g.matchings);
    }
    Ok(corpus)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalySpec {
    /// Extra entries of existing articles whose URL only adds a query string.
    pub query_duplicates: usize,
    /// Repeated tweet records.
    pub duplicate_tweets: usize,
    /// Extra articles dated far in the future.
    pub far_future: usize,
    /// Extra articles dated in year 18.
    pub ancient: usize,
    pub seed: u64,
}

impl AnomalySpec {
    pub fn is_empty(&self) -> bool {
        self.query_duplicates == 0 && self.duplicate_tweets == 0 && self.far_future == 0 && self.ancient == 0
    }
}

/// What ingestion is expected to undo.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyLedger {
    pub query_duplicate_urls: Vec<String>,
    pub duplicated_tweet_ids: Vec<String>,
    pub far_future_urls: Vec<String>,
    pub ancient_urls: Vec<String>,
}

impl AnomalyLedger {
    pub fn out_of_window(&self) -> usize {
        self.far_future_urls.len() + self.ancient_urls.len()
    }
}

/// Add the anomalies described by `spec` to `corpus` and return the ground
/// truth. Query-string duplicates repeat an existing article's title and time
/// and re-reference a prefix of its tweets, so merging must restore both the
/// article count and the distinct mentions.
pub fn inject_anomalies(corpus: &mut SyntheticCorpus, spec: &AnomalySpec) -> Result<AnomalyLedger> {
    let mut ledger = AnomalyLedger::default();
    if spec.is_empty() {
        return Ok(ledger);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n = corpus.articles.len();
    if spec.query_duplicates > n {
        return Err(Error::Input(format!(
            "{} query duplicates requested from {n} articles",
            spec.query_duplicates
        )));
    }
    let mut picked: Vec<usize> = sample(&mut rng, n, spec.query_duplicates).into_vec();
    picked.sort_unstable();
    for (j, &i) in picked.iter().enumerate() {
        let original = corpus.articles[i].clone();
        let sep = if original.url.contains('?') { '&' } else { '?' };
        let dup_url = format!("{}{sep}utm_source=feed{j}", original.url);
        let ids: Vec<String> = corpus
            .matchings
            .iter()
            .filter(|m| m.article_url == original.url)
            .flat_map(|m| m.tweet_ids.iter().cloned())
            .collect();
        let keep = ids.len().div_ceil(2);
        corpus.articles.push(ArticleRecord {
            url: dup_url.clone(),
            ..original
        });
        corpus.matchings.push(MatchingRecord {
            article_url: dup_url.clone(),
            tweet_ids: ids[..keep].to_vec(),
        });
        ledger.query_duplicate_urls.push(dup_url);
    }

    if spec.duplicate_tweets > 0 {
        if corpus.tweets.is_empty() {
            return Err(Error::Input("no tweets to duplicate".into()));
        }
        let picks: BTreeSet<usize> = if spec.duplicate_tweets <= corpus.tweets.len() {
            sample(&mut rng, corpus.tweets.len(), spec.duplicate_tweets).into_iter().collect()
        } else {
            return Err(Error::Input("more duplicate tweets than tweets".into()));
        };
        for i in picks {
            let t = corpus.tweets[i].clone();
            ledger.duplicated_tweet_ids.push(t.id.clone());
            corpus.tweets.push(t);
        }
    }

    let future = Utc.with_ymd_and_hms(2118, 12, 2, 0, 0, 0).unwrap();
    let ancient = Utc.with_ymd_and_hms(18, 12, 2, 0, 0, 0).unwrap();
    for (count, at, tag, out) in [
        (spec.far_future, future, "future", &mut ledger.far_future_urls),
        (spec.ancient, ancient, "ancient", &mut ledger.ancient_urls),
    ] {
        for j in 0..count {
            let url = format!("https://misdated.example.com/{tag}/{j}");
            corpus.articles.push(ArticleRecord {
                url: url.clone(),
                title: format!("Misdated {tag} story {j}"),
                published_at: at + Duration::seconds(j as i64),
                text: String::new(),
            });
            out.push(url);
        }
    }
    Ok(ledger)
}
