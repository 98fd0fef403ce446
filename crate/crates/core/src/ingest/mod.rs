//! Record ingestion: parsing, URL canonicalisation, matching assembly,
//! merging of duplicate article entries and publication-time filtering.

mod merge;
pub mod records;
mod url;

use std::collections::HashMap;

use chrono::{DateTime, Duration, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

pub use self::merge::{merge_matchings, normalize_title, MergeKey};
pub use self::records::{
    load_records, load_records_from_path, write_records, write_records_to_path, ArticleRecord,
    Loaded, MatchingRecord, Record, RecordKind, TweetRecord,
};
pub use self::url::{canonicalize_url, host_of, is_valid_link};
use crate::error::{Error, Result};

/// Mentions stamped up to this many seconds before their article are clamped
/// to the publication time; earlier ones are dropped.
pub const CLOCK_SKEW_TOLERANCE_SECS: i64 = 300;

/// Lookback of the default publication window, before the first observed tweet.
pub const DEFAULT_WINDOW_LOOKBACK_SECS: i64 = 7 * 24 * 3600;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub url: String,
    pub canonical_url: String,
    pub title: String,
    pub published_at: DateTime<Utc>,
    pub text: String,
    pub publisher: String,
}

impl Article {
    pub fn from_record(record: ArticleRecord) -> Result<Self> {
        let canonical_url = canonicalize_url(&record.url)?;
        let publisher = host_of(&record.url)?;
        Ok(Article {
            url: record.url,
            canonical_url,
            title: record.title,
            published_at: record.published_at.trunc_subsecs(0),
            text: record.text,
            publisher,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub user: String,
    pub text: String,
    pub published_at: DateTime<Utc>,
    pub links: Vec<String>,
}

impl From<TweetRecord> for Tweet {
    fn from(r: TweetRecord) -> Self {
        Tweet {
            id: r.id,
            user: r.user,
            text: r.text,
            published_at: r.published_at.trunc_subsecs(0),
            links: r.links,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub tweet_id: String,
    pub published_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub article: Article,
    pub mentions: Vec<Mention>,
}

impl Matching {
    pub fn new(article: Article) -> Self {
        Matching {
            article,
            mentions: Vec::new(),
        }
    }

    pub fn t0(&self) -> DateTime<Utc> {
        self.article.published_at
    }
}

/// Closed interval of acceptable publication times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl PublicationWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start >= end {
            return Err(Error::Domain(format!(
                "publication window start {start} is not before end {end}"
            )));
        }
        Ok(PublicationWindow { start, end })
    }

    /// `[ingestion_start - 7 days, now + clock skew]`.
    pub fn around(ingestion_start: DateTime<Utc>, now: DateTime<Utc>) -> Result<Self> {
        Self::new(
            ingestion_start - Duration::seconds(DEFAULT_WINDOW_LOOKBACK_SECS),
            now + Duration::seconds(CLOCK_SKEW_TOLERANCE_SECS),
        )
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Keep exactly the articles published inside `window` (both ends included).
pub fn filter_publication_window(articles: Vec<Article>, window: &PublicationWindow) -> Vec<Article> {
    articles
        .into_iter()
        .filter(|a| window.contains(a.published_at))
        .collect()
}

/// Same rule as [`filter_publication_window`], applied to matchings.
pub fn retain_in_window(matchings: Vec<Matching>, window: &PublicationWindow) -> Vec<Matching> {
    matchings
        .into_iter()
        .filter(|m| window.contains(m.article.published_at))
        .collect()
}

/// Counters reported by [`assemble_matchings`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyStats {
    pub articles: usize,
    pub duplicate_article_records: usize,
    pub duplicate_tweet_records: usize,
    pub unknown_article_refs: usize,
    pub unknown_tweet_refs: usize,
    pub clamped_mentions: usize,
    pub dropped_early_mentions: usize,
}

/// Join incremental matching records with their articles and tweets. Every
/// article yields one (possibly empty) matching; duplicate article entries
/// are left for [`merge_matchings`].
pub fn assemble_matchings(
    articles: Vec<Article>,
    tweets: Vec<Tweet>,
    matchings: &[MatchingRecord],
) -> (Vec<Matching>, AssemblyStats) {
    let mut stats = AssemblyStats::default();

    let mut by_url: HashMap<String, usize> = HashMap::with_capacity(articles.len());
    let mut out: Vec<Matching> = Vec::with_capacity(articles.len());
    for a in articles {
        if by_url.contains_key(&a.url) {
            stats.duplicate_article_records += 1;
            continue;
        }
        by_url.insert(a.url.clone(), out.len());
        out.push(Matching::new(a));
    }
    stats.articles = out.len();

    let mut tweet_times: HashMap<String, DateTime<Utc>> = HashMap::with_capacity(tweets.len());
    for t in tweets {
        if tweet_times.contains_key(&t.id) {
            stats.duplicate_tweet_records += 1;
        } else {
            tweet_times.insert(t.id, t.published_at);
        }
    }

    let skew = Duration::seconds(CLOCK_SKEW_TOLERANCE_SECS);
    for rec in matchings {
        let Some(&idx) = by_url.get(&rec.article_url) else {
            stats.unknown_article_refs += 1;
            continue;
        };
        let m = &mut out[idx];
        let t0 = m.article.published_at;
        for id in &rec.tweet_ids {
            let Some(&at) = tweet_times.get(id) else {
                stats.unknown_tweet_refs += 1;
                continue;
            };
            let published_at = if at >= t0 {
                at
            } else if at >= t0 - skew {
                stats.clamped_mentions += 1;
                t0
            } else {
                stats.dropped_early_mentions += 1;
                continue;
            };
            m.mentions.push(Mention {
                tweet_id: id.clone(),
                published_at,
            });
        }
    }
    (out, stats)
}
