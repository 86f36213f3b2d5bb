use crate::error::Result;
use crate::numeric::{Matrix, SeededRng};

/// Label-preserving augmentation: `x` plus isotropic Gaussian noise of std `std`.
pub fn augment_features(x: &[f64], std: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let noise = rng.gaussian_sample(x.len(), 0.0, std)?;
    Ok(x.iter().zip(noise).map(|(a, n)| a + n).collect())
}

/// Row-wise [`augment_features`].
pub fn augment_matrix(x: &Matrix, std: f64, rng: &mut SeededRng) -> Result<Matrix> {
    let mut out = Vec::with_capacity(x.data().len());
    for row in x.iter_rows() {
        out.extend(augment_features(row, std, rng)?);
    }
    Matrix::new(x.rows(), x.cols(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_is_identity() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(augment_features(&x, 0.0, &mut SeededRng::new(1)).unwrap(), x);
    }

    #[test]
    fn seeded() {
        let x = vec![0.0; 5];
        let a = augment_features(&x, 0.3, &mut SeededRng::new(8)).unwrap();
        let b = augment_features(&x, 0.3, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        assert!(augment_features(&x, -0.1, &mut SeededRng::new(8)).is_err());
    }

    #[test]
    fn mean_squared_perturbation() {
        // E‖noise‖² = d·std²
        let d = 16;
        let std = 0.05;
        let x = vec![0.7; d];
        let mut rng = SeededRng::new(99);
        let draws = 10_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let y = augment_features(&x, std, &mut rng).unwrap();
            total += y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let mean = total / draws as f64;
        let expected = d as f64 * std * std;
        assert!((mean / expected - 1.0).abs() < 0.03, "{mean} vs {expected}");
    }
}
