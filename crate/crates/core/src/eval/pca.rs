use crate::error::{shape, Result};
use crate::numeric::{dot, norm, Matrix};

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITERS: usize = 20_000;
/// Eigenvalues below this fraction of the covariance trace count as zero.
const RANK_TOL: f64 = 1e-12;

/// Leading principal directions of the rows of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Principal {
    pub mean: Vec<f64>,
    /// Unit directions, largest variance first. A zero vector marks a missing component.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component (population normalization).
    pub variances: Vec<f64>,
}

impl Principal {
    /// Scores of every row of `x` on the stored components.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(shape(format!("expected {} columns, got {}", self.mean.len(), x.cols())));
        }
        let k = self.components.len();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut centered = vec![0.0; x.cols()];
        for (r, row) in x.iter_rows().enumerate() {
            for ((c, v), m) in centered.iter_mut().zip(row).zip(&self.mean) {
                *c = v - m;
            }
            for (j, comp) in self.components.iter().enumerate() {
                out.set(r, j, dot(&centered, comp));
            }
        }
        Ok(out)
    }
}

fn covariance(x: &Matrix) -> (Vec<f64>, Matrix) {
    let mean = x.column_means();
    let d = x.cols();
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.iter_rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let out = cov.row_mut(i);
            for j in 0..d {
                out[j] += ci * centered[j];
            }
        }
    }
    let n = x.rows() as f64;
    (mean, cov.scale(1.0 / n))
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix by power iteration.
fn dominant_eigenpair(cov: &Matrix) -> (f64, Vec<f64>) {
    let d = cov.rows();
    // Start from the column with the largest norm; it has a non-zero overlap
    // with the dominant eigenvector whenever the matrix is non-zero.
    let start = (0..d)
        .map(|i| cov.row(i))
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .map(|r| r.to_vec())
        .unwrap_or_default();
    let n0 = norm(&start);
    if n0 == 0.0 {
        return (0.0, vec![0.0; d]);
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / n0).collect();
    let mut next = vec![0.0; d];
    for _ in 0..POWER_MAX_ITERS {
        for (i, out) in next.iter_mut().enumerate() {
            *out = dot(cov.row(i), &v);
        }
        let nn = norm(&next);
        if nn == 0.0 {
            return (0.0, vec![0.0; d]);
        }
        for x in next.iter_mut() {
            *x /= nn;
        }
        let diff = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if diff < POWER_TOL {
            break;
        }
    }
    let cv: Vec<f64> = (0..d).map(|i| dot(cov.row(i), &v)).collect();
    (dot(&v, &cv), v)
}

/// Fixes the sign so the largest-magnitude entry is positive.
fn canonical_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`k` principal components of the rows of `x`.
///
/// Components beyond the numerical rank are returned as zero vectors with
/// zero variance.
pub fn principal_components(x: &Matrix, k: usize) -> Result<Principal> {
    if x.rows() < 2 {
        return Err(shape(format!("principal components need >= 2 rows, got {}", x.rows())));
    }
    x.ensure_finite("principal components input")?;
    let (mean, mut cov) = covariance(x);
    let d = x.cols();
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    let mut components = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for _ in 0..k {
        let (lambda, mut v) = dominant_eigenpair(&cov);
        if trace <= 0.0 || lambda <= RANK_TOL * trace {
            components.push(vec![0.0; d]);
            variances.push(0.0);
            continue;
        }
        canonical_sign(&mut v);
        for i in 0..d {
            let row = cov.row_mut(i);
            for j in 0..d {
                row[j] -= lambda * v[i] * v[j];
            }
        }
        components.push(v);
        variances.push(lambda);
    }
    Ok(Principal { mean, components, variances })
}

/// Projection of the rows onto the top two principal components.
///
/// Missing components (rank below two) are zero-filled.
pub fn project_2d(features: &Matrix) -> Result<Matrix> {
    if features.cols() < 2 {
        return Err(shape(format!("2-D projection needs >= 2 columns, got {}", features.cols())));
    }
    principal_components(features, 2)?.transform(features)
}

/// Population variance of the first-principal-component scores after
/// min-max normalization to [0, 1]. Constant inputs give 0.
pub fn feature_variance(features: &Matrix) -> Result<f64> {
    let pc = principal_components(features, 1)?;
    let scores = pc.transform(features)?.into_data();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(0.0);
    }
    let normalized: Vec<f64> = scores.iter().map(|s| (s - lo) / range).collect();
    let n = normalized.len() as f64;
    let mean = normalized.iter().sum::<f64>() / n;
    Ok(normalized.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}
