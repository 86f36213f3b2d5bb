use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pca::feature_variance;
use crate::data::{all_features, labels_of, LabeledRecord};
use crate::error::{data, shape, Result};
use crate::model::ModelState;

/// Binary confusion counts with class 1 as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// F1 on the positive class; 0 when there are no true positives.
    pub fn f1(&self) -> f64 {
        match 2 * self.tp + self.fp + self.fn_ {
            0 => 0.0,
            d => (2 * self.tp) as f64 / d as f64,
        }
    }
}

/// Normalized first-component variance of raw and projected features for one domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainVariance {
    pub var_x: f64,
    pub var_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
    /// Keyed by domain tag; domains with fewer than two rows are omitted.
    pub domain_variance: BTreeMap<String, DomainVariance>,
    pub seed: u64,
    pub config_hash: String,
}

impl EvalReport {
    pub fn with_metadata(mut self, seed: u64, config_hash: impl Into<String>) -> Self {
        self.seed = seed;
        self.config_hash = config_hash.into();
        self
    }
}

/// Per-domain feature variance of inputs and their projections.
pub fn domain_variances(model: &ModelState, records: &[LabeledRecord]) -> Result<BTreeMap<String, DomainVariance>> {
    let mut groups: BTreeMap<&str, Vec<&LabeledRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.domain.as_str()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (domain, rows) in groups {
        if rows.len() < 2 {
            continue;
        }
        let owned: Vec<LabeledRecord> = rows.into_iter().cloned().collect();
        let x = all_features(&owned)?;
        let z = model.project(&x)?;
        out.insert(domain.to_string(), DomainVariance { var_x: feature_variance(&x)?, var_z: feature_variance(&z)? });
    }
    Ok(out)
}

/// Accuracy, F1 and variance diagnostics of `model` on labeled target test records.
pub fn evaluate(model: &ModelState, test: &[LabeledRecord]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(data("evaluation needs a non-empty test set"));
    }
    let predicted = model.predict(&all_features(test)?)?;
    let confusion = Confusion::from_predictions(&predicted, &labels_of(test))?;
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        confusion,
        domain_variance: domain_variances(model, test)?,
        seed: 0,
        config_hash: String::new(),
    })
}
