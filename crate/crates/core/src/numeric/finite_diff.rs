use crate::error::{numeric, param, Result};

/// Central-difference gradient of `f` at `x`.
///
/// Each coordinate is `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(param(format!("step h must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe)?;
        probe[i] = orig - h;
        let minus = f(&probe)?;
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(numeric(format!("function value not finite around coordinate {i}")));
        }
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(numeric(format!("difference quotient overflowed at coordinate {i}")));
        }
        grad.push(g);
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`, the comparison used by gradient checks.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::matrix::dot;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|x| Ok(dot(x, x)), &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_diff_grad(|_| Ok(7.5), &[1.0, -3.0, 0.25], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn sum_has_unit_gradient() {
        let g = finite_diff_grad(|x| Ok(x.iter().sum()), &[0.3, -1.0, 8.0, 2.0], 1e-5).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_polynomials_match_analytic_gradient() {
        // f(x) = x0^3 - 2 x0 x1^2 + 4 x1 + 0.5 x2^2 x0
        let f = |x: &[f64]| Ok(x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 4.0 * x[1] + 0.5 * x[2] * x[2] * x[0]);
        let grad = |x: &[f64]| {
            vec![
                3.0 * x[0] * x[0] - 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2],
                -4.0 * x[0] * x[1] + 4.0,
                x[2] * x[0],
            ]
        };
        for x in [[1.0, 2.0, 3.0], [-0.7, 0.4, 1.9], [2.5, -1.5, -0.3]] {
            let fd = finite_diff_grad(f, &x, 1e-5).unwrap();
            for (a, b) in fd.iter().zip(grad(&x)) {
                assert!(relative_error(*a, b, 1e-8) < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn non_finite_values_are_reported() {
        let r = finite_diff_grad(|x| Ok(x[0].ln()), &[0.0], 1e-5);
        assert!(r.is_err());
        let r = finite_diff_grad(|_| Ok(f64::NAN), &[0.0], 1e-5);
        assert!(matches!(r, Err(crate::Error::Numeric(_))));
        assert!(finite_diff_grad(|_| Ok(0.0), &[0.0], 0.0).is_err());
    }
}
