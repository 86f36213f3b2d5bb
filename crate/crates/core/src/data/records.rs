use serde::{Deserialize, Serialize};

use crate::error::{data, Result};
use crate::numeric::Matrix;

/// One news item as a precomputed embedding.
///
/// `label` is `1` for falsified (out-of-context) and `0` for pristine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub domain: String,
    pub label: Option<u8>,
    pub features: Vec<f64>,
}

/// A record whose label is known: source training data and target test data.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRecord {
    pub id: String,
    pub domain: String,
    pub label: u8,
    pub features: Vec<f64>,
}

/// A target training record. It has no label field at all.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledRecord {
    pub id: String,
    pub domain: String,
    pub features: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn into_labeled(self) -> Result<LabeledRecord> {
        match self.label {
            Some(label) => Ok(LabeledRecord { id: self.id, domain: self.domain, label, features: self.features }),
            None => Err(data(format!("record {} has no label", self.id))),
        }
    }

    pub fn into_unlabeled(self) -> UnlabeledRecord {
        UnlabeledRecord { id: self.id, domain: self.domain, features: self.features }
    }
}

impl From<LabeledRecord> for EmbeddingRecord {
    fn from(r: LabeledRecord) -> Self {
        Self { id: r.id, domain: r.domain, label: Some(r.label), features: r.features }
    }
}

impl From<UnlabeledRecord> for EmbeddingRecord {
    fn from(r: UnlabeledRecord) -> Self {
        Self { id: r.id, domain: r.domain, label: None, features: r.features }
    }
}

/// Access to the feature vector, shared by labeled and unlabeled records.
pub trait HasFeatures {
    fn features(&self) -> &[f64];
}

impl HasFeatures for EmbeddingRecord {
    fn features(&self) -> &[f64] {
        &self.features
    }
}

impl HasFeatures for LabeledRecord {
    fn features(&self) -> &[f64] {
        &self.features
    }
}

impl HasFeatures for UnlabeledRecord {
    fn features(&self) -> &[f64] {
        &self.features
    }
}

/// Stacks the feature vectors of `records` (in the order of `idx`) into a matrix.
pub fn feature_matrix<R: HasFeatures>(records: &[R], idx: impl IntoIterator<Item = usize>) -> Result<Matrix> {
    let rows: Vec<&[f64]> = idx.into_iter().map(|i| records[i].features()).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, records.first().map_or(0, |r| r.features().len())));
    }
    Matrix::from_rows(&rows)
}

/// Feature matrix of every record, in order.
pub fn all_features<R: HasFeatures>(records: &[R]) -> Result<Matrix> {
    feature_matrix(records, 0..records.len())
}

pub fn labels_of(records: &[LabeledRecord]) -> Vec<u8> {
    records.iter().map(|r| r.label).collect()
}
