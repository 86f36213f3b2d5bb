use crate::error::{param, shape, Result};
use crate::numeric::{squared_distance, Matrix};

/// Gaussian RBF kernel `exp(-‖a - b‖² / 2σ²)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(shape(format!("kernel inputs of length {} and {}", a.len(), b.len())));
    }
    check_sigma(sigma)?;
    Ok(rbf_unchecked(a, b, sigma))
}

#[inline]
fn rbf_unchecked(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * sigma * sigma)).exp()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(param(format!("kernel bandwidth must be > 0, got {sigma}")))
    }
}

/// Gram matrix `K[i][j] = k(rows_i, rows_j)`.
pub fn gram_matrix(z: &Matrix, sigma: f64) -> Result<Matrix> {
    check_sigma(sigma)?;
    let n = z.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in (i + 1)..n {
            let v = rbf_unchecked(z.row(i), z.row(j), sigma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(k)
}

/// Median of the pairwise Euclidean distances between distinct rows.
///
/// Falls back to `1.0` when the median is zero (e.g. all rows identical).
/// With an even number of pairs the two middle distances are averaged.
pub fn median_heuristic_sigma(z: &Matrix) -> Result<f64> {
    let n = z.rows();
    if n < 2 {
        return Err(param(format!("median heuristic needs at least 2 rows, got {n}")));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(z.row(i), z.row(j)).sqrt());
        }
    }
    let len = dists.len();
    let mid = len / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if len % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

/// `K[i][j] = k(a_i, b_j)`.
fn kernel_block(a: &Matrix, b: &Matrix, sigma: f64) -> Matrix {
    let mut k = Matrix::zeros(a.rows(), b.rows());
    for (i, ra) in a.iter_rows().enumerate() {
        for (out, rb) in k.row_mut(i).iter_mut().zip(b.iter_rows()) {
            *out = rbf_unchecked(ra, rb, sigma);
        }
    }
    k
}

/// Sum of all entries in row-major order.
fn block_sum(k: &Matrix) -> f64 {
    k.data().iter().sum()
}

fn check_pair(zs: &Matrix, zt: &Matrix, sigma: f64) -> Result<()> {
    if zs.rows() == 0 || zt.rows() == 0 {
        return Err(param("MMD needs at least one row on each side"));
    }
    if zs.cols() != zt.cols() {
        return Err(shape(format!("MMD inputs of width {} and {}", zs.cols(), zt.cols())));
    }
    check_sigma(sigma)
}

struct KernelBlocks {
    ss: Matrix,
    st: Matrix,
    tt: Matrix,
}

impl KernelBlocks {
    fn new(zs: &Matrix, zt: &Matrix, sigma: f64) -> Result<Self> {
        check_pair(zs, zt, sigma)?;
        Ok(Self { ss: gram_matrix(zs, sigma)?, st: kernel_block(zs, zt, sigma), tt: gram_matrix(zt, sigma)? })
    }

    fn bracket(&self) -> f64 {
        let m = self.ss.rows() as f64;
        let n = self.tt.rows() as f64;
        block_sum(&self.ss) / (m * m) - 2.0 * block_sum(&self.st) / (m * n) + block_sum(&self.tt) / (n * n)
    }
}

/// Squared-MMD estimator (the bracket before the square root), unclamped.
pub fn mmd_bracket(zs: &Matrix, zt: &Matrix, sigma: f64) -> Result<f64> {
    Ok(KernelBlocks::new(zs, zt, sigma)?.bracket())
}

/// Biased empirical MMD between two row sets.
///
/// The bracket is clamped at zero before the square root, so the result is
/// always `>= 0`.
pub fn empirical_mmd(zs: &Matrix, zt: &Matrix, sigma: f64) -> Result<f64> {
    Ok(mmd_bracket(zs, zt, sigma)?.max(0.0).sqrt())
}

/// Empirical MMD together with its gradient with respect to every row of both inputs.
///
/// `sigma` is treated as a constant. At a zero bracket the subgradient `0` is used.
pub fn empirical_mmd_with_grad(zs: &Matrix, zt: &Matrix, sigma: f64) -> Result<(f64, Matrix, Matrix)> {
    let blocks = KernelBlocks::new(zs, zt, sigma)?;
    let value = blocks.bracket().max(0.0).sqrt();
    if value == 0.0 {
        return Ok((value, Matrix::zeros(zs.rows(), zs.cols()), Matrix::zeros(zt.rows(), zt.cols())));
    }
    let outer = 0.5 / value;
    let m = zs.rows() as f64;
    let n = zt.rows() as f64;
    let inv_s2 = 1.0 / (sigma * sigma);

    // d/dx_i Σ_j c·k(x_i, y_j) = -(c/σ²) Σ_j k_ij (x_i - y_j)
    //                          = -(c/σ²) (rowsum_i · x_i - (K y)_i)
    let pull = |x: &Matrix, k: &Matrix, y: &Matrix, coef: f64| -> Result<Matrix> {
        let ky = k.matmul(y)?;
        let mut d = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let rowsum: f64 = k.row(i).iter().sum();
            let scale = -coef * inv_s2;
            for ((out, &xv), &kyv) in d.row_mut(i).iter_mut().zip(x.row(i)).zip(ky.row(i)) {
                *out = scale * (rowsum * xv - kyv);
            }
        }
        Ok(d)
    };
    // Within-set terms count each symmetric pair twice, hence the factor 2.
    let mut d_zs = pull(zs, &blocks.ss, zs, 2.0 * outer / (m * m))?;
    d_zs.add_assign(&pull(zs, &blocks.st, zt, -2.0 * outer / (m * n))?)?;
    let mut d_zt = pull(zt, &blocks.tt, zt, 2.0 * outer / (n * n))?;
    d_zt.add_assign(&pull(zt, &blocks.st.transpose(), zs, -2.0 * outer / (m * n))?)?;
    Ok((value, d_zs, d_zt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_grad, relative_error, SeededRng};

    fn random(rng: &mut SeededRng, r: usize, c: usize, mean: f64) -> Matrix {
        Matrix::new(r, c, rng.gaussian_sample(r * c, mean, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[0.3, -2.0], &[0.3, -2.0], 0.7).unwrap(), 1.0);
        let v = rbf_kernel(&[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(matches!(rbf_kernel(&[1.0], &[0.0], 0.0), Err(crate::Error::Parameter(_))));
        assert!(matches!(rbf_kernel(&[1.0], &[0.0, 1.0], 1.0), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = SeededRng::new(8);
        for _ in 0..20 {
            let a = rng.gaussian_sample(5, 0.0, 1.0).unwrap();
            let b = rng.gaussian_sample(5, 0.0, 1.0).unwrap();
            assert_eq!(rbf_kernel(&a, &b, 1.3).unwrap(), rbf_kernel(&b, &a, 1.3).unwrap());
        }
    }

    #[test]
    fn median_heuristic_cases() {
        let two = Matrix::from_rows(&[[0.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(median_heuristic_sigma(&two).unwrap(), 2.0);
        let same = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(median_heuristic_sigma(&same).unwrap(), 1.0);
        let line = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        assert_eq!(median_heuristic_sigma(&line).unwrap(), 2.0);
        // four points: distances {1,3,6,2,5,3} -> sorted 1,2,3,3,5,6 -> median 3
        let four = Matrix::from_rows(&[[0.0], [1.0], [3.0], [6.0]]).unwrap();
        assert_eq!(median_heuristic_sigma(&four).unwrap(), 3.0);
        assert!(median_heuristic_sigma(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn mmd_of_identical_sets_is_exactly_zero() {
        let mut rng = SeededRng::new(1);
        let z = random(&mut rng, 7, 3, 0.0);
        assert_eq!(empirical_mmd(&z, &z, 1.1).unwrap(), 0.0);
    }

    #[test]
    fn single_point_sets() {
        let a = Matrix::from_rows(&[[0.0]]).unwrap();
        let b = Matrix::from_rows(&[[2.0]]).unwrap();
        let expected = (2.0 - 2.0 * (-2.0_f64).exp()).sqrt();
        assert!((empirical_mmd(&a, &b, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.315_039_707_965_799).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = Matrix::zeros(0, 2);
        let b = Matrix::zeros(2, 2);
        assert!(matches!(empirical_mmd(&a, &b, 1.0), Err(crate::Error::Parameter(_))));
        assert!(empirical_mmd(&b, &Matrix::zeros(2, 3), 1.0).is_err());
        assert!(empirical_mmd(&b, &b, -1.0).is_err());
    }

    #[test]
    fn monotone_in_distance() {
        let a = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let mut last = 0.0;
        for step in 1..30 {
            let b = Matrix::from_rows(&[[0.2 * step as f64, 0.0]]).unwrap();
            let v = empirical_mmd(&a, &b, 1.0).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(77);
        let zs = random(&mut rng, 4, 3, 0.0);
        let zt = random(&mut rng, 3, 3, 0.8);
        let sigma = 1.4;
        let (_, d_zs, d_zt) = empirical_mmd_with_grad(&zs, &zt, sigma).unwrap();
        let mut flat = zs.data().to_vec();
        flat.extend_from_slice(zt.data());
        let split = zs.data().len();
        let fd = finite_diff_grad(
            |x| {
                let a = Matrix::new(4, 3, x[..split].to_vec())?;
                let b = Matrix::new(3, 3, x[split..].to_vec())?;
                empirical_mmd(&a, &b, sigma)
            },
            &flat,
            1e-6,
        )
        .unwrap();
        let analytic: Vec<f64> = d_zs.data().iter().chain(d_zt.data()).copied().collect();
        for (a, f) in analytic.iter().zip(&fd) {
            assert!(relative_error(*a, *f, 1e-6) < 1e-4, "{a} vs {f}");
        }
    }

    #[test]
    fn zero_mmd_has_zero_subgradient() {
        let z = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0]]).unwrap();
        let (v, a, b) = empirical_mmd_with_grad(&z, &z, 1.0).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(b.max_abs(), 0.0);
    }
}
