use serde::{Deserialize, Serialize};

use super::records::EmbeddingRecord;
use crate::error::{param, Result};
use crate::numeric::{dot, norm, SeededRng};

/// Rotation applied per domain index per unit of shift magnitude, in radians.
pub const ROTATION_PER_UNIT: f64 = 0.25;
/// Translation applied per domain index per unit of shift magnitude, in noise std units.
pub const OFFSET_PER_UNIT: f64 = 0.5;

/// Parameters of the seeded multi-domain benchmark.
///
/// Each domain holds two balanced Gaussian classes whose means differ by
/// `margin` along a shared class direction. Domain `k` is rotated by
/// `k · shift · ROTATION_PER_UNIT` in a seeded random 2-plane and translated by
/// `k · shift · OFFSET_PER_UNIT` along a seeded direction that leans half on the
/// class direction, so larger `k` moves the decision boundary further.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_domains: usize,
    pub samples_per_domain: usize,
    pub dim: usize,
    pub margin: f64,
    pub shift: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_domains: 3, samples_per_domain: 2000, dim: 32, margin: 3.0, shift: 2.0, noise_std: 1.0, seed: 0 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_domains == 0 || self.samples_per_domain == 0 || self.dim == 0 {
            return Err(param("domain count, samples per domain and dim must be >= 1"));
        }
        if !(self.shift >= 0.0) || !self.shift.is_finite() {
            return Err(param(format!("shift magnitude must be >= 0, got {}", self.shift)));
        }
        if !(self.margin >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(param("margin and noise std must be >= 0"));
        }
        if self.dim < 2 && self.shift > 0.0 && self.n_domains > 1 {
            return Err(param("rotation needs dim >= 2"));
        }
        Ok(())
    }
}

pub fn domain_name(k: usize) -> String {
    format!("domain{k}")
}

fn random_unit(rng: &mut SeededRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random unit vector orthogonal to every vector in `basis` (assumed orthonormal).
fn random_orthogonal(rng: &mut SeededRng, basis: &[&[f64]], dim: usize) -> Vec<f64> {
    loop {
        let mut v = random_unit(rng, dim);
        for b in basis {
            let p = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b.iter()) {
                *x -= p * y;
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rotates `x` by `angle` within the plane spanned by orthonormal `p`, `q`.
fn rotate_in_plane(x: &mut [f64], p: &[f64], q: &[f64], angle: f64) {
    let (a, b) = (dot(x, p), dot(x, q));
    let (s, c) = angle.sin_cos();
    let (a2, b2) = (c * a - s * b, s * a + c * b);
    for i in 0..x.len() {
        x[i] += (a2 - a) * p[i] + (b2 - b) * q[i];
    }
}

/// Generates `n_domains × samples_per_domain` labeled records; deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<EmbeddingRecord>> {
    spec.validate()?;
    let d = spec.dim;
    let mut geometry = SeededRng::with_stream(spec.seed, 0);
    let class_dir = random_unit(&mut geometry, d);
    let (plane_p, plane_q, offset_dir) = if d >= 2 {
        let p = random_unit(&mut geometry, d);
        let q = random_orthogonal(&mut geometry, &[&p], d);
        let side = random_orthogonal(&mut geometry, &[&class_dir], d);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let off: Vec<f64> = class_dir.iter().zip(&side).map(|(u, s)| h * u + h * s).collect();
        (p, q, off)
    } else {
        (vec![0.0; d], vec![0.0; d], class_dir.clone())
    };

    let mut records = Vec::with_capacity(spec.n_domains * spec.samples_per_domain);
    for k in 0..spec.n_domains {
        let mut rng = SeededRng::with_stream(spec.seed, 1 + k as u64);
        let angle = k as f64 * spec.shift * ROTATION_PER_UNIT;
        let offset = k as f64 * spec.shift * OFFSET_PER_UNIT;
        for i in 0..spec.samples_per_domain {
            let label = (i % 2) as u8;
            let sign = if label == 1 { 0.5 } else { -0.5 };
            let mut x: Vec<f64> = rng
                .gaussian_sample(d, 0.0, spec.noise_std)?
                .into_iter()
                .zip(&class_dir)
                .map(|(n, u)| n + sign * spec.margin * u)
                .collect();
            if d >= 2 && angle != 0.0 {
                rotate_in_plane(&mut x, &plane_p, &plane_q, angle);
            }
            for (xi, v) in x.iter_mut().zip(&offset_dir) {
                *xi += offset * v;
            }
            records.push(EmbeddingRecord {
                id: format!("d{k}-{i:06}"),
                domain: domain_name(k),
                label: Some(label),
                features: x,
            });
        }
    }
    Ok(records)
}
