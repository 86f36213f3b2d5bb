use crate::error::{numeric, param, shape, Result};
use crate::numeric::{dot, norm, Matrix};

/// Added to row norms before dividing in cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

/// Row-aligned anchors and their augmentations: row `i` of `augments` is the
/// augmented view of row `i` of `anchors`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedBatch {
    anchors: Matrix,
    augments: Matrix,
}

impl PairedBatch {
    pub fn new(anchors: Matrix, augments: Matrix) -> Result<Self> {
        if anchors.shape() != augments.shape() {
            return Err(shape(format!(
                "anchors {:?} and augments {:?} differ in shape",
                anchors.shape(),
                augments.shape()
            )));
        }
        Ok(Self { anchors, augments })
    }

    pub fn anchors(&self) -> &Matrix {
        &self.anchors
    }

    pub fn augments(&self) -> &Matrix {
        &self.augments
    }

    pub fn len(&self) -> usize {
        self.anchors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.rows() == 0
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.anchors, self.augments)
    }
}

/// NT-Xent style contrastive loss over the `2b` items `[anchors; augments]`.
///
/// For each anchor `i` the positive is its augmentation and the denominator runs
/// over every other item in the augmented batch. Per-anchor terms are summed.
/// With `symmetrize`, augments also act as anchors and the two directions are averaged.
pub fn contrastive_loss(batch: &PairedBatch, temperature: f64, symmetrize: bool) -> Result<f64> {
    Ok(contrastive_forward(batch, temperature, symmetrize, false)?.0)
}

/// Contrastive loss with gradients with respect to anchors and augments.
pub fn contrastive_loss_with_grad(
    batch: &PairedBatch,
    temperature: f64,
    symmetrize: bool,
) -> Result<(f64, Matrix, Matrix)> {
    let (loss, grads) = contrastive_forward(batch, temperature, symmetrize, true)?;
    let (da, dp) = grads.expect("gradients requested").split_rows(batch.len());
    Ok((loss, da, dp))
}

fn contrastive_forward(
    batch: &PairedBatch,
    temperature: f64,
    symmetrize: bool,
    want_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(param(format!("temperature must be > 0, got {temperature}")));
    }
    let b = batch.len();
    if b == 0 {
        return Err(param("contrastive loss needs at least one pair"));
    }
    let items = batch.anchors.vstack(&batch.augments)?;
    let total = 2 * b;
    let mut norms = Vec::with_capacity(total);
    let mut unit = items.clone();
    for r in 0..total {
        let n = norm(items.row(r));
        if n == 0.0 {
            return Err(numeric(format!("item {r} has zero norm; cosine similarity undefined")));
        }
        norms.push(n);
        let denom = n + COSINE_EPS;
        for v in unit.row_mut(r) {
            *v /= denom;
        }
    }
    // logits[i][k] = cos(z_i, z_k) / t
    let logits = unit.matmul_t(&unit)?.scale(1.0 / temperature);

    let anchor_rows: Vec<(usize, usize)> = if symmetrize {
        (0..b).map(|i| (i, i + b)).chain((0..b).map(|i| (i + b, i))).collect()
    } else {
        (0..b).map(|i| (i, i + b)).collect()
    };
    let weight = if symmetrize { 0.5 } else { 1.0 };

    let mut loss = 0.0;
    // d loss / d logits
    let mut d_logits = if want_grad { Some(Matrix::zeros(total, total)) } else { None };
    for &(i, pos) in &anchor_rows {
        let row = logits.row(i);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .fold(0.0, |acc, (_, &v)| acc + (v - max).exp());
        let log_denom = max + sum_exp.ln();
        loss += weight * (log_denom - row[pos]);
        if let Some(dl) = d_logits.as_mut() {
            let out = dl.row_mut(i);
            for (k, &v) in row.iter().enumerate() {
                if k != i {
                    out[k] += weight * (v - log_denom).exp();
                }
            }
            out[pos] -= weight;
        }
    }
    if !loss.is_finite() {
        return Err(numeric("contrastive loss is not finite"));
    }
    let Some(d_logits) = d_logits else {
        return Ok((loss, None));
    };

    // logits = U Uᵀ / t  =>  dU = (G + Gᵀ) U / t
    let g = d_logits.add(&d_logits.transpose())?.scale(1.0 / temperature);
    let d_unit = g.matmul(&unit)?;
    // u = z / (‖z‖ + ε)  =>  dz = du / (‖z‖ + ε) - z (z·du) / (‖z‖ (‖z‖ + ε)²)
    let mut d_items = Matrix::zeros(total, items.cols());
    for r in 0..total {
        let z = items.row(r);
        let du = d_unit.row(r);
        let n = norms[r];
        let denom = n + COSINE_EPS;
        let proj = dot(z, du) / (n * denom * denom);
        for (c, out) in d_items.row_mut(r).iter_mut().enumerate() {
            *out = du[c] / denom - z[c] * proj;
        }
    }
    Ok((loss, Some(d_items)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_grad, relative_error, SeededRng};

    fn random(rng: &mut SeededRng, r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, rng.gaussian_sample(r * c, 0.0, 1.0).unwrap()).unwrap()
    }

    /// Direct transcription: every anchor, every other item, no shared intermediates.
    fn brute_force(anchors: &Matrix, augments: &Matrix, t: f64) -> f64 {
        let b = anchors.rows();
        let items: Vec<Vec<f64>> = anchors.iter_rows().chain(augments.iter_rows()).map(|r| r.to_vec()).collect();
        let cos = |x: &[f64], y: &[f64]| {
            let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            xy / ((nx + COSINE_EPS) * (ny + COSINE_EPS))
        };
        let mut total = 0.0;
        for i in 0..b {
            let num = (cos(&items[i], &items[i + b]) / t).exp();
            let mut den = 0.0;
            for k in 0..2 * b {
                if k != i {
                    den += (cos(&items[i], &items[k]) / t).exp();
                }
            }
            total -= (num / den).ln();
        }
        total
    }

    #[test]
    fn single_pair_is_exactly_zero() {
        let batch = PairedBatch::new(
            Matrix::from_rows(&[[0.3, -1.0, 2.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.5, 0.1]]).unwrap(),
        )
        .unwrap();
        assert_eq!(contrastive_loss(&batch, 0.5, false).unwrap(), 0.0);
    }

    #[test]
    fn basis_vectors_match_enumeration() {
        let e = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let batch = PairedBatch::new(e.clone(), e.clone()).unwrap();
        let v = contrastive_loss(&batch, 1.0, false).unwrap();
        // per anchor: -ln(e / (e + 1 + 1))
        let expected = -2.0 * (std::f64::consts::E / (std::f64::consts::E + 2.0)).ln();
        assert!((v - expected).abs() < 1e-10);
        assert!((v - brute_force(&e, &e, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_batches() {
        let mut rng = SeededRng::new(4);
        for b in 1..=3 {
            for d in 1..=4 {
                let a = random(&mut rng, b, d);
                let p = random(&mut rng, b, d);
                let batch = PairedBatch::new(a.clone(), p.clone()).unwrap();
                for t in [0.1, 0.5, 1.0] {
                    let v = contrastive_loss(&batch, t, false).unwrap();
                    assert!((v - brute_force(&a, &p, t)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let mut rng = SeededRng::new(6);
        let a = random(&mut rng, 3, 4);
        let p = random(&mut rng, 3, 4);
        let base = contrastive_loss(&PairedBatch::new(a.clone(), p.clone()).unwrap(), 0.5, false).unwrap();
        for c in [0.5, 3.0, 250.0] {
            let scaled = PairedBatch::new(a.scale(c), p.scale(c)).unwrap();
            assert!((contrastive_loss(&scaled, 0.5, false).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let batch = PairedBatch::new(z.clone(), z.clone()).unwrap();
        assert!(matches!(contrastive_loss(&batch, 0.5, false), Err(crate::Error::Numeric(_))));
        let ok = PairedBatch::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        assert!(matches!(contrastive_loss(&ok, 0.0, false), Err(crate::Error::Parameter(_))));
        assert!(PairedBatch::new(Matrix::zeros(2, 2), Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn moving_augments_toward_anchors_lowers_loss() {
        let mut rng = SeededRng::new(10);
        let a = random(&mut rng, 4, 3);
        let p = random(&mut rng, 4, 3);
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let w = step as f64 / 10.0;
            let moved = p.scale(1.0 - w).add(&a.scale(w)).unwrap();
            let v = contrastive_loss(&PairedBatch::new(a.clone(), moved).unwrap(), 0.5, false).unwrap();
            assert!(v <= last + 1e-12);
            last = v;
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(12);
        for symmetrize in [false, true] {
            let a = random(&mut rng, 3, 4);
            let p = random(&mut rng, 3, 4);
            let batch = PairedBatch::new(a.clone(), p.clone()).unwrap();
            let (_, da, dp) = contrastive_loss_with_grad(&batch, 0.7, symmetrize).unwrap();
            let mut flat = a.data().to_vec();
            flat.extend_from_slice(p.data());
            let fd = finite_diff_grad(
                |x| {
                    let b = PairedBatch::new(
                        Matrix::new(3, 4, x[..12].to_vec())?,
                        Matrix::new(3, 4, x[12..].to_vec())?,
                    )?;
                    contrastive_loss(&b, 0.7, symmetrize)
                },
                &flat,
                1e-6,
            )
            .unwrap();
            let analytic: Vec<f64> = da.data().iter().chain(dp.data()).copied().collect();
            for (x, y) in analytic.iter().zip(&fd) {
                assert!(relative_error(*x, *y, 1e-6) < 1e-4, "{x} vs {y}");
            }
        }
    }
}
