use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Bandwidth of the RBF kernel used by the MMD term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SigmaPolicy {
    /// Median pairwise distance of the combined source+target batch, recomputed
    /// every step and treated as a constant during differentiation.
    MedianHeuristic,
    Fixed(f64),
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy::MedianHeuristic
    }
}

/// Weights and scalars of the training objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_ce: f64,
    pub lambda_ctr: f64,
    pub lambda_mmd: f64,
    /// Contrastive softmax temperature.
    pub temperature: f64,
    pub sigma: SigmaPolicy,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_ce: 0.5,
            lambda_ctr: 0.5,
            lambda_mmd: 1.0,
            temperature: 0.5,
            sigma: SigmaPolicy::MedianHeuristic,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_ce", self.lambda_ce),
            ("lambda_ctr", self.lambda_ctr),
            ("lambda_mmd", self.lambda_mmd),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(param(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if let SigmaPolicy::Fixed(s) = self.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(param(format!("fixed sigma must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// The five scalar terms of the objective for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub ce_source: f64,
    pub ce_augment: f64,
    pub ctr_source: f64,
    pub ctr_target: f64,
    pub mmd: f64,
}

impl LossComponents {
    pub fn total(&self, w: &LossWeights) -> Result<f64> {
        total_loss(self.ce_source, self.ce_augment, self.ctr_source, self.ctr_target, self.mmd, w)
    }
}

/// `½λ_CE(ce_s + ce_s⁺) + ½λ_ctr(ctr_s + ctr_t) + λ_MMD·mmd`.
pub fn total_loss(
    ce_s: f64,
    ce_s_aug: f64,
    ctr_s: f64,
    ctr_t: f64,
    mmd: f64,
    w: &LossWeights,
) -> Result<f64> {
    if ![ce_s, ce_s_aug, ctr_s, ctr_t, mmd].iter().all(|v| v.is_finite()) {
        return Err(crate::error::numeric("loss component is not finite"));
    }
    Ok(0.5 * w.lambda_ce * (ce_s + ce_s_aug) + 0.5 * w.lambda_ctr * (ctr_s + ctr_t) + w.lambda_mmd * mmd)
}
