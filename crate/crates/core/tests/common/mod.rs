#![allow(dead_code)]

use conda_tta::losses::COSINE_EPS;
use conda_tta::numeric::{dot, norm, Matrix};

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a.get(i, j).powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i)).fold(f64::INFINITY, f64::min)
}

/// NT-Xent written out term by term: anchors first, then augments; each anchor
/// is scored against its augment over all other 2b - 1 items. Cosine adds
/// `COSINE_EPS` to each norm, as the library defines it.
pub fn brute_force_ntxent(anchors: &Matrix, augments: &Matrix, t: f64) -> f64 {
    let b = anchors.rows();
    let items: Vec<&[f64]> = anchors.iter_rows().chain(augments.iter_rows()).collect();
    let cos = |i: usize, k: usize| dot(items[i], items[k]) / ((norm(items[i]) + COSINE_EPS) * (norm(items[k]) + COSINE_EPS));
    let mut loss = 0.0;
    for i in 0..b {
        let numerator = (cos(i, i + b) / t).exp();
        let mut denominator = 0.0;
        for k in 0..2 * b {
            if k != i {
                denominator += (cos(i, k) / t).exp();
            }
        }
        loss -= (numerator / denominator).ln();
    }
    loss
}
