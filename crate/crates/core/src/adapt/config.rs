use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::losses::LossWeights;

/// Training and test-time adaptation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops once validation CE has failed to improve for more than this many epochs.
    pub patience: usize,
    pub learning_rate: f64,
    pub loss_weights: LossWeights,
    /// Std of the isotropic Gaussian noise used as augmentation.
    pub augment_std: f64,
    pub seed: u64,
    pub tta_batch_size: usize,
    /// Number of passes over the target test set during test-time adaptation.
    pub tta_passes: usize,
    pub symmetrize_contrastive: bool,
    /// Fraction of the source set held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: 20,
            patience: 5,
            learning_rate: 2e-4,
            loss_weights: LossWeights::default(),
            augment_std: 0.05,
            seed: 0,
            tta_batch_size: 256,
            tta_passes: 1,
            symmetrize_contrastive: false,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 || self.tta_batch_size < 2 {
            return Err(param("batch sizes must be >= 2 (batch norm needs a variance)"));
        }
        if self.tta_passes == 0 {
            return Err(param("tta_passes must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(param(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.augment_std >= 0.0) || !self.augment_std.is_finite() {
            return Err(param(format!("augment std must be >= 0, got {}", self.augment_std)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(param("validation fraction must lie in [0, 1)"));
        }
        self.loss_weights.validate()
    }
}
