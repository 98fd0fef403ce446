//! Line-delimited JSON wire records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::url::{canonicalize_url, is_valid_link};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Article,
    Tweet,
    Matching,
}

/// A record that can be read from a JSONL source.
pub trait Record: DeserializeOwned + Serialize {
    const KIND: RecordKind;

    /// Semantic check applied after JSON decoding; a failing record is
    /// counted as malformed.
    fn validate(self) -> Option<Self> {
        Some(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub url: String,
    pub title: String,
    pub published_at: DateTime<Utc>,
    #[serde(default)]
    pub text: String,
}

impl Record for ArticleRecord {
    const KIND: RecordKind = RecordKind::Article;

    fn validate(self) -> Option<Self> {
        canonicalize_url(&self.url).ok().map(|_| self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub user: String,
    #[serde(default)]
    pub text: String,
    pub published_at: DateTime<Utc>,
    #[serde(default)]
    pub links: Vec<String>,
}

impl Record for TweetRecord {
    const KIND: RecordKind = RecordKind::Tweet;

    fn validate(mut self) -> Option<Self> {
        self.links.retain(|l| is_valid_link(l));
        Some(self)
    }
}

/// Incremental matching: some of the tweets known to link `article_url`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingRecord {
    pub article_url: String,
    pub tweet_ids: Vec<String>,
}

impl Record for MatchingRecord {
    const KIND: RecordKind = RecordKind::Matching;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

/// Parse JSONL records; malformed lines are skipped and counted. More than
/// half the non-blank lines being malformed is a corpus error.
pub fn load_records<T: Record, R: Read>(source: R) -> Result<Loaded<T>> {
    let reader = BufReader::new(source);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("<line {}>", lineno + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line).ok().and_then(T::validate) {
            Some(r) => records.push(r),
            None => {
                log::debug!("skipping malformed {:?} line {}", T::KIND, lineno + 1);
                skipped += 1;
            }
        }
    }
    let total = records.len() + skipped;
    if skipped * 2 > total {
        return Err(Error::Corpus(format!(
            "{skipped} of {total} {:?} lines are malformed",
            T::KIND
        )));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} malformed {:?} lines", T::KIND);
    }
    Ok(Loaded { records, skipped })
}

pub fn load_records_from_path<T: Record>(path: impl AsRef<Path>) -> Result<Loaded<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_records(file)
}

pub fn write_records<T: Serialize, W: Write>(sink: W, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(sink);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<sink>", e))?;
    }
    w.flush().map_err(|e| Error::io("<sink>", e))
}

pub fn write_records_to_path<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(file, records)
}
