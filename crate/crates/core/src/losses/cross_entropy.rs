use crate::error::{param, Result};

/// Probabilities are clamped to `[CE_EPS, 1 - CE_EPS]` before taking logs.
pub const CE_EPS: f64 = 1e-12;

fn check_label(y: u8) -> Result<()> {
    if y <= 1 {
        Ok(())
    } else {
        Err(param(format!("label must be 0 or 1, got {y}")))
    }
}

/// Binary cross-entropy of predicted positive-class probability `y_hat` against `y`.
pub fn cross_entropy(y_hat: f64, y: u8) -> Result<f64> {
    check_label(y)?;
    if y_hat.is_nan() {
        return Err(crate::error::numeric("predicted probability is NaN"));
    }
    let p = y_hat.clamp(CE_EPS, 1.0 - CE_EPS);
    let y = f64::from(y);
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

/// Mean cross-entropy over a batch.
pub fn cross_entropy_batch(y_hat: &[f64], y: &[u8]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(crate::error::shape(format!(
            "{} predictions for {} labels",
            y_hat.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(param("cross-entropy of an empty batch"));
    }
    let mut total = 0.0;
    for (&p, &label) in y_hat.iter().zip(y) {
        total += cross_entropy(p, label)?;
    }
    Ok(total / y.len() as f64)
}

/// Mean cross-entropy and its derivative with respect to each `y_hat`.
///
/// Clamped probabilities get derivative zero.
pub fn cross_entropy_batch_with_grad(y_hat: &[f64], y: &[u8]) -> Result<(f64, Vec<f64>)> {
    let loss = cross_entropy_batch(y_hat, y)?;
    let n = y.len() as f64;
    let grad = y_hat
        .iter()
        .zip(y)
        .map(|(&p, &label)| {
            if p < CE_EPS || p > 1.0 - CE_EPS {
                0.0
            } else {
                let label = f64::from(label);
                (-label / p + (1.0 - label) / (1.0 - p)) / n
            }
        })
        .collect();
    Ok((loss, grad))
}
