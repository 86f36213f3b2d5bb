use crate::error::{param, shape, Result};

/// Adam with bias-corrected first and second moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// One moment buffer per tensor, sized by `shapes`.
    pub fn new(shapes: &[usize], learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0) || !learning_rate.is_finite() {
            return Err(param(format!("learning rate must be > 0, got {learning_rate}")));
        }
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn for_tensors(tensors: &[&[f64]], learning_rate: f64) -> Result<Self> {
        let shapes: Vec<usize> = tensors.iter().map(|t| t.len()).collect();
        Self::new(&shapes, learning_rate)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(shape(format!("tensor {i}: moment size {} vs param {} grad {}", self.m[i].len(), p.len(), g.len())));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut adam = AdamState::new(&[3], 0.1).unwrap();
        let mut w = vec![1.0, -2.0, 0.5];
        let before = w.clone();
        adam.step(&mut [&mut w], &[&[0.0; 3]]).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_on_square() {
        let mut adam = AdamState::new(&[1], 0.1).unwrap();
        let mut w = vec![1.0];
        let g = [2.0 * w[0]];
        adam.step(&mut [&mut w], &[&g]).unwrap();
        // independent arithmetic: m = 0.1 g, v = 0.001 g², bias-corrected back to g and g²
        let m_hat = (0.1 * 2.0) / (1.0 - 0.9);
        let v_hat = (0.001 * 4.0) / (1.0 - 0.999);
        let expected = 1.0 - 0.1 * m_hat / (f64::sqrt(v_hat) + 1e-8);
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((w[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let mut adam = AdamState::new(&[1], 0.1).unwrap();
        let mut w = vec![0.0];
        for _ in 0..200 {
            let g = [2.0 * (w[0] - 3.0)];
            adam.step(&mut [&mut w], &[&g]).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.05, "{}", w[0]);
        assert_eq!(adam.steps(), 200);
    }

    #[test]
    fn shape_errors() {
        let mut adam = AdamState::new(&[2], 0.1).unwrap();
        let mut w = vec![0.0; 3];
        assert!(adam.step(&mut [&mut w], &[&[0.0; 3]]).is_err());
        assert!(AdamState::new(&[1], 0.0).is_err());
    }
}
