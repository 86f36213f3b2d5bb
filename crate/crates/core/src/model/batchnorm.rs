use serde::{Deserialize, Serialize};

use crate::error::{param, shape, Error, Result};
use crate::numeric::Matrix;

/// Whether batch norm normalizes by batch statistics or by running estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnMode {
    Train,
    Eval,
}

/// Batch normalization over features, with affine `gamma`/`beta` and
/// exponentially averaged running estimates.
///
/// Running estimates follow `μ̂ ← (1-ρ)μ̂ + ρμ_batch` and
/// `σ̂² ← (1-ρ)σ̂² + ρσ²_batch`, where `σ²_batch` is the biased (divide by `b`)
/// batch variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    pub mode: BnMode,
    /// Number of running-estimate updates applied so far.
    pub batches_tracked: u64,
}

/// Values saved by a train-mode forward pass.
#[derive(Clone, Debug)]
pub struct BnCache {
    pub x_hat: Matrix,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnGrad {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

impl BatchNormState {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
            mode: BnMode::Train,
            batches_tracked: 0,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn with_momentum(mut self, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(param(format!("momentum must lie in [0, 1], got {momentum}")));
        }
        self.momentum = momentum;
        Ok(self)
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.features() {
            return Err(shape(format!("batch norm over {} features got width {}", self.features(), x.cols())));
        }
        Ok(())
    }

    /// Batch mean and biased batch variance per feature.
    pub fn batch_statistics(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let b = x.rows() as f64;
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = xi - m;
                *v += d * d;
            }
        }
        for v in &mut var {
            *v /= b;
        }
        (mean, var)
    }

    /// Normalizes with batch statistics without touching the running estimates.
    pub fn forward_train(&self, x: &Matrix) -> Result<(Matrix, BnCache)> {
        self.check_width(x)?;
        if x.rows() < 2 {
            return Err(param(format!("train-mode batch norm needs at least 2 rows, got {}", x.rows())));
        }
        let (batch_mean, batch_var) = Self::batch_statistics(x);
        let inv_std: Vec<f64> = batch_var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut x_hat = x.clone();
        let mut y = x.clone();
        for r in 0..x.rows() {
            let xh = x_hat.row_mut(r);
            for c in 0..xh.len() {
                xh[c] = (xh[c] - batch_mean[c]) * inv_std[c];
            }
            let xh = x_hat.row(r).to_vec();
            for (c, out) in y.row_mut(r).iter_mut().enumerate() {
                *out = self.gamma[c] * xh[c] + self.beta[c];
            }
        }
        Ok((y, BnCache { x_hat, inv_std, batch_mean, batch_var }))
    }

    /// Applies one running-estimate update from observed batch statistics.
    pub fn update_running(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let rho = self.momentum;
        for (r, &m) in self.running_mean.iter_mut().zip(batch_mean) {
            *r = (1.0 - rho) * *r + rho * m;
        }
        for (r, &v) in self.running_var.iter_mut().zip(batch_var) {
            *r = (1.0 - rho) * *r + rho * v;
        }
        self.batches_tracked += 1;
    }

    /// Normalizes with the frozen running estimates.
    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        if self.batches_tracked == 0 {
            return Err(Error::State("batch norm running estimates are uninitialized".into()));
        }
        let scale: Vec<f64> = self
            .running_var
            .iter()
            .zip(&self.gamma)
            .map(|(v, g)| g / (v + self.epsilon).sqrt())
            .collect();
        let mut y = x.clone();
        for r in 0..y.rows() {
            for (c, out) in y.row_mut(r).iter_mut().enumerate() {
                *out = (*out - self.running_mean[c]) * scale[c] + self.beta[c];
            }
        }
        Ok(y)
    }

    /// Mode-dispatched forward. In train mode the running estimates are updated.
    pub fn bn_forward(&mut self, x: &Matrix) -> Result<Matrix> {
        match self.mode {
            BnMode::Train => {
                let (y, cache) = self.forward_train(x)?;
                self.update_running(&cache.batch_mean, &cache.batch_var);
                Ok(y)
            }
            BnMode::Eval => self.forward_eval(x),
        }
    }

    /// Backward of the train-mode forward. Returns `dL/dx` and accumulates
    /// `gamma`/`beta` gradients. Running estimates receive no gradient.
    pub fn backward(&self, cache: &BnCache, dy: &Matrix, grad: &mut BnGrad) -> Result<Matrix> {
        if dy.shape() != cache.x_hat.shape() {
            return Err(shape("batch norm upstream gradient shape mismatch"));
        }
        let b = dy.rows() as f64;
        let f = self.features();
        let mut sum_dxhat = vec![0.0; f];
        let mut sum_dxhat_xhat = vec![0.0; f];
        for r in 0..dy.rows() {
            let (dyr, xh) = (dy.row(r), cache.x_hat.row(r));
            for c in 0..f {
                grad.gamma[c] += dyr[c] * xh[c];
                grad.beta[c] += dyr[c];
                let dxh = dyr[c] * self.gamma[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * xh[c];
            }
        }
        let mut dx = Matrix::zeros(dy.rows(), f);
        for r in 0..dy.rows() {
            let (dyr, xh) = (dy.row(r), cache.x_hat.row(r));
            let out = dx.row_mut(r);
            for c in 0..f {
                let dxh = dyr[c] * self.gamma[c];
                out[c] = cache.inv_std[c] / b * (b * dxh - sum_dxhat[c] - xh[c] * sum_dxhat_xhat[c]);
            }
        }
        Ok(dx)
    }

    pub fn zero_grad(&self) -> BnGrad {
        BnGrad { gamma: vec![0.0; self.features()], beta: vec![0.0; self.features()] }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.features();
        if self.beta.len() != f || self.running_mean.len() != f || self.running_var.len() != f {
            return Err(shape("batch norm vectors differ in length"));
        }
        if self.running_var.iter().any(|v| *v < 0.0) {
            return Err(param("running variance must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.momentum) || !(self.epsilon > 0.0) {
            return Err(param("batch norm momentum or epsilon out of range"));
        }
        Ok(())
    }
}
