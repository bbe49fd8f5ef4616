use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, SampleRecord};
use crate::error::{Error, Result};

/// Which record attribute the train/test partition is keyed on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitBy {
    #[default]
    Content,
    Method,
}

impl SplitBy {
    fn is_content(&self) -> bool {
        *self == SplitBy::Content
    }

    pub fn key<'a>(&self, record: &'a SampleRecord) -> &'a str {
        match self {
            SplitBy::Content => &record.content_id,
            SplitBy::Method => &record.method_id,
        }
    }
}

/// A seeded train/test partition. Ids are kept sorted so the JSON form is
/// identical across platforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub ratio: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "SplitBy::is_content")]
    pub by: SplitBy,
}

pub fn make_split(manifest: &DatasetManifest, seed: u64, ratio: f64) -> Result<SplitPlan> {
    make_split_by(manifest, seed, ratio, SplitBy::Content)
}

/// Partitions the manifest's content (or method) ids into train and test sets.
///
/// The train side gets `round(ratio * n)` ids, clamped so both sides are nonempty.
pub fn make_split_by(manifest: &DatasetManifest, seed: u64, ratio: f64, by: SplitBy) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let ids: BTreeSet<&str> = manifest.records.iter().map(|r| by.key(r)).collect();
    if ids.len() < 2 {
        return Err(Error::CannotSplit(format!(
            "need at least 2 distinct {} ids, found {}",
            if by.is_content() { "content" } else { "method" },
            ids.len()
        )));
    }
    let mut ids: Vec<String> = ids.into_iter().map(str::to_owned).collect();
    let n = ids.len();
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut test_ids = ids.split_off(n_train);
    let mut train_ids = ids;
    train_ids.sort();
    test_ids.sort();
    Ok(SplitPlan { seed, ratio, train_ids, test_ids, by })
}

impl SplitPlan {
    /// Checks disjointness and that the plan covers exactly the manifest's ids.
    pub fn validate_against(&self, manifest: &DatasetManifest) -> Result<()> {
        let train: BTreeSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let test: BTreeSet<&str> = self.test_ids.iter().map(String::as_str).collect();
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::InvalidSplit(format!("id {id:?} is on both sides")));
        }
        let ids: BTreeSet<&str> = manifest.records.iter().map(|r| self.by.key(r)).collect();
        let covered: BTreeSet<&str> = train.union(&test).copied().collect();
        if covered != ids {
            return Err(Error::InvalidSplit("split ids do not match the manifest".into()));
        }
        Ok(())
    }

    pub fn train_indices(&self, manifest: &DatasetManifest) -> Vec<usize> {
        self.side_indices(manifest, &self.train_ids)
    }

    pub fn test_indices(&self, manifest: &DatasetManifest) -> Vec<usize> {
        self.side_indices(manifest, &self.test_ids)
    }

    fn side_indices(&self, manifest: &DatasetManifest, side: &[String]) -> Vec<usize> {
        manifest
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| side.binary_search_by(|id| id.as_str().cmp(self.by.key(r))).is_ok())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}
