//! On-disk store of cleaned matchings: `matchings.jsonl` plus `meta.json`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Matching, PublicationWindow};

pub const STORE_SCHEMA_VERSION: u32 = 1;
pub const MATCHINGS_FILE: &str = "matchings.jsonl";
pub const META_FILE: &str = "meta.json";

/// Counts reported by an ingestion run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub article_records: usize,
    pub tweet_records: usize,
    pub matching_records: usize,
    pub skipped_lines: usize,
    pub invalid_articles: usize,
    pub duplicate_article_records: usize,
    pub duplicate_tweet_records: usize,
    pub unknown_article_refs: usize,
    pub unknown_tweet_refs: usize,
    pub clamped_mentions: usize,
    pub dropped_early_mentions: usize,
    /// Matchings before merging.
    pub assembled: usize,
    /// Matchings absorbed by merging.
    pub merged_away: usize,
    /// Matchings removed by the publication window.
    pub out_of_window: usize,
    pub articles: usize,
    pub mentions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub schema_version: u32,
    /// End of the observation period; targets are only known for articles
    /// published at least one horizon earlier.
    pub observed_until: DateTime<Utc>,
    pub window: Option<PublicationWindow>,
    pub stats: IngestStats,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Store {
    pub meta: StoreMeta,
    /// Ordered by publication time, then canonical URL.
    pub matchings: Vec<Matching>,
}

impl Store {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MATCHINGS_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for m in &self.matchings {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let meta = dir.join(META_FILE);
        std::fs::write(&meta, serde_json::to_vec_pretty(&self.meta)?).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let raw = std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_slice(&raw)?;
        if meta.schema_version != STORE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported store schema version {}",
                meta.schema_version
            )));
        }
        let path = dir.join(MATCHINGS_FILE);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut matchings = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            matchings.push(serde_json::from_str(&line)?);
        }
        Ok(Store { meta, matchings })
    }

    /// Chronological split: the latest `fraction` of matchings (rounded down)
    /// are held out for validation.
    pub fn split(&self, validation_fraction: f64) -> Result<(&[Matching], &[Matching])> {
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(Error::Config(format!(
                "validation fraction {validation_fraction} outside [0, 1)"
            )));
        }
        let n_val = (self.matchings.len() as f64 * validation_fraction) as usize;
        Ok(self.matchings.split_at(self.matchings.len() - n_val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::tests::matching_with_offsets;

    fn store(n: usize) -> Store {
        Store {
            meta: StoreMeta {
                schema_version: STORE_SCHEMA_VERSION,
                observed_until: DateTime::from_timestamp(2_000_000_000, 0).unwrap(),
                window: None,
                stats: IngestStats::default(),
            },
            matchings: (0..n).map(|i| matching_with_offsets(&[i as i64 * 60, 7200])).collect(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(4);
        s.save(dir.path()).unwrap();
        assert_eq!(Store::load(dir.path()).unwrap(), s);
    }

    #[test]
    fn missing_store_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Store::load(dir.path().join("nope")), Err(Error::Io { .. })));
    }

    #[test]
    fn split_sizes() {
        let s = store(12);
        let (train, val) = s.split(0.25).unwrap();
        assert_eq!((train.len(), val.len()), (9, 3));
        assert!(s.split(1.0).is_err());
    }
}
