use serde::{Deserialize, Serialize};

use crate::error::{shape, Result};
use crate::numeric::{Matrix, SeededRng};

/// Fully connected layer `y = x Wᵀ + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Gradient buffers shaped like a [`LinearLayer`].
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weight: Vec<f64> = (0..in_dim * out_dim).map(|_| rng.uniform(-bound, bound)).collect();
        let bias = (0..out_dim).map(|_| rng.uniform(-bound, bound)).collect();
        Self { weight: Matrix::new(out_dim, in_dim, weight).expect("sized"), bias }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weight: Matrix::zeros(out_dim, in_dim), bias: vec![0.0; out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(shape(format!("linear layer expects width {}, got {}", self.in_dim(), x.cols())));
        }
        x.matmul_t(&self.weight)?.add_row_vector(&self.bias)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, grad: &mut LinearGrad) -> Result<Matrix> {
        grad.weight.add_assign(&dy.t_matmul(x)?)?;
        for (g, s) in grad.bias.iter_mut().zip(dy.column_sums()) {
            *g += s;
        }
        dy.matmul(&self.weight)
    }

    pub fn zero_grad(&self) -> LinearGrad {
        LinearGrad { weight: Matrix::zeros(self.out_dim(), self.in_dim()), bias: vec![0.0; self.out_dim()] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.out_dim() {
            return Err(shape(format!("bias length {} for {} outputs", self.bias.len(), self.out_dim())));
        }
        self.weight.ensure_finite("linear weight")?;
        if !self.bias.iter().all(|v| v.is_finite()) {
            return Err(crate::error::numeric("non-finite linear bias"));
        }
        Ok(())
    }
}
