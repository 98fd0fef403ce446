use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use unicode_normalization::UnicodeNormalization;

use super::{Article, Matching, Mention};

/// Titles compare equal after NFC normalisation and whitespace trimming.
pub fn normalize_title(title: &str) -> String {
    title.trim().nfc().collect()
}

/// Identity under which matchings are merged: same host and path, same
/// title, same publication time.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergeKey {
    pub canonical_url: String,
    pub title: String,
    pub published_at: DateTime<Utc>,
}

impl MergeKey {
    pub fn of(article: &Article) -> Self {
        MergeKey {
            canonical_url: article.canonical_url.clone(),
            title: normalize_title(&article.title),
            published_at: article.published_at,
        }
    }
}

/// Merge matchings that refer to the same article and deduplicate their
/// mentions by tweet id.
///
/// The representative article of a group is the one with the smallest raw
/// URL (then raw title, then text), so the result does not depend on input
/// order. Mentions are ordered by time then tweet id; output is ordered by
/// publication time, then canonical URL.
pub fn merge_matchings(batch: Vec<Matching>) -> Vec<Matching> {
    let mut groups: BTreeMap<MergeKey, (Article, BTreeMap<String, DateTime<Utc>>)> =
        BTreeMap::new();
    for m in batch {
        let key = MergeKey::of(&m.article);
        let entry = groups
            .entry(key)
            .or_insert_with(|| (m.article.clone(), BTreeMap::new()));
        let a = &m.article;
        if (&a.url, &a.title, &a.text) < (&entry.0.url, &entry.0.title, &entry.0.text) {
            entry.0 = m.article;
        }
        for mention in m.mentions {
            entry
                .1
                .entry(mention.tweet_id)
                .and_modify(|t| *t = (*t).min(mention.published_at))
                .or_insert(mention.published_at);
        }
    }

    let mut out: Vec<(MergeKey, Matching)> = groups
        .into_iter()
        .map(|(key, (article, mentions))| {
            let mut mentions: Vec<Mention> = mentions
                .into_iter()
                .map(|(tweet_id, published_at)| Mention {
                    tweet_id,
                    published_at,
                })
                .collect();
            mentions.sort_by(|a, b| {
                (a.published_at, &a.tweet_id).cmp(&(b.published_at, &b.tweet_id))
            });
            (key, Matching { article, mentions })
        })
        .collect();
    out.sort_by(|(ka, _), (kb, _)| {
        (ka.published_at, &ka.canonical_url, &ka.title).cmp(&(
            kb.published_at,
            &kb.canonical_url,
            &kb.title,
        ))
    });
    out.into_iter().map(|(_, m)| m).collect()
}
