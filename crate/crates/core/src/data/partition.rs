use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::records::{EmbeddingRecord, LabeledRecord, UnlabeledRecord};
use crate::error::{data, param, Result};
use crate::numeric::SeededRng;

/// Disjoint, non-empty sets of source and target domain tags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainPartition {
    source: BTreeSet<String>,
    target: BTreeSet<String>,
}

impl DomainPartition {
    pub fn new<S: Into<String>, T: Into<String>>(
        source: impl IntoIterator<Item = S>,
        target: impl IntoIterator<Item = T>,
    ) -> Result<Self> {
        let source: BTreeSet<String> = source.into_iter().map(Into::into).collect();
        let target: BTreeSet<String> = target.into_iter().map(Into::into).collect();
        if source.is_empty() || target.is_empty() {
            return Err(data("source and target domain sets must both be non-empty"));
        }
        if let Some(both) = source.intersection(&target).next() {
            return Err(data(format!("domain {both:?} is both source and target")));
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &BTreeSet<String> {
        &self.source
    }

    pub fn target(&self) -> &BTreeSet<String> {
        &self.target
    }
}

/// How target records are divided into an unlabeled training pool and a labeled test set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSplit {
    pub test_fraction: f64,
    pub seed: u64,
}

impl TargetSplit {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&test_fraction) {
            return Err(param(format!("test fraction must lie in [0, 1], got {test_fraction}")));
        }
        Ok(Self { test_fraction, seed })
    }
}

impl Default for TargetSplit {
    fn default() -> Self {
        Self { test_fraction: 0.2, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedData {
    pub source: Vec<LabeledRecord>,
    pub target_train: Vec<UnlabeledRecord>,
    pub target_test: Vec<LabeledRecord>,
}

/// Splits records into labeled source, unlabeled target-train and labeled target-test.
///
/// Target-train labels are dropped here; nothing downstream can read them.
pub fn partition(
    records: Vec<EmbeddingRecord>,
    domains: &DomainPartition,
    split: TargetSplit,
) -> Result<PartitionedData> {
    let mut source = Vec::new();
    let mut target = Vec::new();
    for r in records {
        if domains.source.contains(&r.domain) {
            source.push(r.into_labeled()?);
        } else if domains.target.contains(&r.domain) {
            target.push(r);
        } else {
            return Err(data(format!("record {} has unknown domain {:?}", r.id, r.domain)));
        }
    }
    let n_test = (target.len() as f64 * split.test_fraction).round() as usize;
    let mut order = SeededRng::new(split.seed).permutation(target.len());
    let test_idx: BTreeSet<usize> = order.drain(..n_test).collect();
    let mut target_train = Vec::new();
    let mut target_test = Vec::new();
    for (i, r) in target.into_iter().enumerate() {
        if test_idx.contains(&i) {
            target_test.push(r.into_labeled()?);
        } else {
            target_train.push(r.into_unlabeled());
        }
    }
    Ok(PartitionedData { source, target_train, target_test })
}
