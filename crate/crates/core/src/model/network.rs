use serde::{Deserialize, Serialize};

use super::batchnorm::{BatchNormState, BnCache, BnGrad, BnMode};
use super::linear::{LinearGrad, LinearLayer};
use crate::error::{param, shape, Result};
use crate::numeric::{Matrix, SeededRng};

/// Layer widths of the projection head and classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub proj_hidden: usize,
    pub proj_out: usize,
    pub cls_hidden: usize,
}

impl ModelDims {
    /// 768 → 768 → 500 projection, 500 → 768 → 768 → 2 classifier.
    pub const REFERENCE: ModelDims = ModelDims { input: 768, proj_hidden: 768, proj_out: 500, cls_hidden: 768 };

    /// Narrow widths for low-dimensional inputs: hidden layers at twice the
    /// input width, projection at the input width.
    pub fn compact(input: usize) -> Self {
        Self { input, proj_hidden: 2 * input, proj_out: input, cls_hidden: 2 * input }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.proj_hidden == 0 || self.proj_out == 0 || self.cls_hidden == 0 {
            return Err(param(format!("all layer widths must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

impl Default for ModelDims {
    fn default() -> Self {
        Self::REFERENCE
    }
}

pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const NUM_CLASSES: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub first: LinearLayer,
    pub second: LinearLayer,
}

/// `dropout → linear → BN → tanh → linear → BN → tanh → dropout → linear → softmax`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub first: LinearLayer,
    pub bn1: BatchNormState,
    pub second: LinearLayer,
    pub bn2: BatchNormState,
    pub output: LinearLayer,
    pub dropout: f64,
}

/// Trainable parameters and batch-norm statistics of the projection head and classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub dims: ModelDims,
    pub projection: ProjectionHead,
    pub classifier: Classifier,
    /// Seed the weights were initialized from.
    pub seed: u64,
}

/// Inverted-dropout masks for one classifier pass: entries are `0` or `1/(1-rate)`.
/// `None` leaves the activations untouched.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DropoutMasks {
    pub before_first: Option<Matrix>,
    pub before_output: Option<Matrix>,
}

pub fn dropout_mask(rng: &mut SeededRng, rows: usize, cols: usize, rate: f64) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(param(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols).map(|_| if rng.bernoulli(rate) { 0.0 } else { keep }).collect();
    Matrix::new(rows, cols, data)
}

impl DropoutMasks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn sample(rng: &mut SeededRng, rows: usize, dims: &ModelDims, rate: f64) -> Result<Self> {
        if rate == 0.0 {
            return Ok(Self::none());
        }
        Ok(Self {
            before_first: Some(dropout_mask(rng, rows, dims.proj_out, rate)?),
            before_output: Some(dropout_mask(rng, rows, dims.cls_hidden, rate)?),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionCache {
    x: Matrix,
    hidden: Matrix,
}

#[derive(Clone, Debug)]
pub struct ClassifierCache {
    input: Matrix,
    bn1: BnCache,
    h1: Matrix,
    bn2: BnCache,
    h2: Matrix,
    h2_dropped: Matrix,
    probs: Matrix,
    masks: DropoutMasks,
}

impl ClassifierCache {
    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn bn_statistics(&self) -> [(&[f64], &[f64]); 2] {
        [(&self.bn1.batch_mean, &self.bn1.batch_var), (&self.bn2.batch_mean, &self.bn2.batch_var)]
    }
}

/// Gradient buffers for every trainable tensor of a [`ModelState`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub proj_first: LinearGrad,
    pub proj_second: LinearGrad,
    pub cls_first: LinearGrad,
    pub bn1: BnGrad,
    pub cls_second: LinearGrad,
    pub bn2: BnGrad,
    pub cls_output: LinearGrad,
}

impl Gradients {
    pub fn zeros_like(model: &ModelState) -> Self {
        let c = &model.classifier;
        Self {
            proj_first: model.projection.first.zero_grad(),
            proj_second: model.projection.second.zero_grad(),
            cls_first: c.first.zero_grad(),
            bn1: c.bn1.zero_grad(),
            cls_second: c.second.zero_grad(),
            bn2: c.bn2.zero_grad(),
            cls_output: c.output.zero_grad(),
        }
    }

    /// Tensors in the same order as [`ModelState::parameters`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.proj_first.weight.data(),
            &self.proj_first.bias,
            self.proj_second.weight.data(),
            &self.proj_second.bias,
            self.cls_first.weight.data(),
            &self.cls_first.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            self.cls_second.weight.data(),
            &self.cls_second.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            self.cls_output.weight.data(),
            &self.cls_output.bias,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn tanh_in_place(m: &mut Matrix) {
    for v in m.data_mut() {
        *v = v.tanh();
    }
}

/// `upstream ⊙ (1 - y²)` where `y = tanh(x)`.
fn tanh_backward(y: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    upstream.zip_with(y, |g, t| g * (1.0 - t * t))
}

fn apply_mask(x: &Matrix, mask: Option<&Matrix>) -> Result<Matrix> {
    match mask {
        Some(m) => x.hadamard(m),
        None => Ok(x.clone()),
    }
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Pulls `dL/dp` back through a row-wise softmax: `dℓ_j = p_j (dp_j - Σ_k p_k dp_k)`.
fn softmax_backward(probs: &Matrix, d_probs: &Matrix) -> Result<Matrix> {
    if probs.shape() != d_probs.shape() {
        return Err(shape("softmax upstream gradient shape mismatch"));
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let (p, dp) = (probs.row(r), d_probs.row(r));
        let inner = crate::numeric::dot(p, dp);
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = p[c] * (dp[c] - inner);
        }
    }
    Ok(out)
}

impl ModelState {
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = SeededRng::new(seed);
        let projection = ProjectionHead {
            first: LinearLayer::init(dims.input, dims.proj_hidden, &mut rng),
            second: LinearLayer::init(dims.proj_hidden, dims.proj_out, &mut rng),
        };
        let classifier = Classifier {
            first: LinearLayer::init(dims.proj_out, dims.cls_hidden, &mut rng),
            bn1: BatchNormState::new(dims.cls_hidden),
            second: LinearLayer::init(dims.cls_hidden, dims.cls_hidden, &mut rng),
            bn2: BatchNormState::new(dims.cls_hidden),
            output: LinearLayer::init(dims.cls_hidden, NUM_CLASSES, &mut rng),
            dropout: DEFAULT_DROPOUT,
        };
        Ok(Self { dims, projection, classifier, seed })
    }

    pub fn with_dropout(mut self, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(param(format!("dropout rate must lie in [0, 1), got {rate}")));
        }
        self.classifier.dropout = rate;
        Ok(self)
    }

    pub fn set_bn_mode(&mut self, mode: BnMode) {
        self.classifier.bn1.mode = mode;
        self.classifier.bn2.mode = mode;
    }

    pub fn set_bn_momentum(&mut self, momentum: f64) -> Result<()> {
        let c = &mut self.classifier;
        c.bn1 = c.bn1.clone().with_momentum(momentum)?;
        c.bn2 = c.bn2.clone().with_momentum(momentum)?;
        Ok(())
    }

    pub fn bn_layers(&self) -> [&BatchNormState; 2] {
        [&self.classifier.bn1, &self.classifier.bn2]
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let (p, c, d) = (&self.projection, &self.classifier, &self.dims);
        let chain = [
            (&p.first, d.input, d.proj_hidden),
            (&p.second, d.proj_hidden, d.proj_out),
            (&c.first, d.proj_out, d.cls_hidden),
            (&c.second, d.cls_hidden, d.cls_hidden),
            (&c.output, d.cls_hidden, NUM_CLASSES),
        ];
        for (layer, i, o) in chain {
            layer.validate()?;
            if layer.in_dim() != i || layer.out_dim() != o {
                return Err(shape(format!(
                    "layer {}x{} does not match declared {}x{}",
                    layer.in_dim(),
                    layer.out_dim(),
                    i,
                    o
                )));
            }
        }
        for bn in [&c.bn1, &c.bn2] {
            bn.validate()?;
            if bn.features() != d.cls_hidden {
                return Err(shape("batch norm width does not match classifier hidden width"));
            }
        }
        if !(0.0..1.0).contains(&c.dropout) {
            return Err(param("dropout rate out of range"));
        }
        Ok(())
    }

    /// Projection head: `second(tanh(first(x)))`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.project_cached(x)?.0)
    }

    pub fn project_cached(&self, x: &Matrix) -> Result<(Matrix, ProjectionCache)> {
        if x.cols() != self.dims.input {
            return Err(shape(format!("model expects input width {}, got {}", self.dims.input, x.cols())));
        }
        let mut hidden = self.projection.first.forward(x)?;
        tanh_in_place(&mut hidden);
        let z = self.projection.second.forward(&hidden)?;
        Ok((z, ProjectionCache { x: x.clone(), hidden }))
    }

    pub fn project_backward(&self, cache: &ProjectionCache, dz: &Matrix, grads: &mut Gradients) -> Result<()> {
        let d_hidden = self.projection.second.backward(&cache.hidden, dz, &mut grads.proj_second)?;
        let d_pre = tanh_backward(&cache.hidden, &d_hidden)?;
        self.projection.first.backward(&cache.x, &d_pre, &mut grads.proj_first)?;
        Ok(())
    }

    /// Classifier forward dispatched on the batch-norm modes. Dropout is not applied.
    ///
    /// Train-mode batch norm normalizes with batch statistics and updates the
    /// running estimates; eval mode uses the frozen estimates.
    pub fn classify(&mut self, z: &Matrix) -> Result<Matrix> {
        self.check_classifier_input(z)?;
        let c = &mut self.classifier;
        let mut h1 = c.bn1.bn_forward(&c.first.forward(z)?)?;
        tanh_in_place(&mut h1);
        let mut h2 = c.bn2.bn_forward(&c.second.forward(&h1)?)?;
        tanh_in_place(&mut h2);
        Ok(softmax_rows(&c.output.forward(&h2)?))
    }

    /// Eval-mode classifier: running estimates, no dropout, no state change.
    pub fn classify_eval(&self, z: &Matrix) -> Result<Matrix> {
        self.check_classifier_input(z)?;
        let c = &self.classifier;
        let mut h1 = c.bn1.forward_eval(&c.first.forward(z)?)?;
        tanh_in_place(&mut h1);
        let mut h2 = c.bn2.forward_eval(&c.second.forward(&h1)?)?;
        tanh_in_place(&mut h2);
        Ok(softmax_rows(&c.output.forward(&h2)?))
    }

    /// Class probabilities for raw inputs in eval mode.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.classify_eval(&self.project(x)?)
    }

    /// Argmax class per row, ties resolved toward class 0.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(argmax_labels(&self.predict_proba(x)?))
    }

    fn check_classifier_input(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.dims.proj_out {
            return Err(shape(format!("classifier expects width {}, got {}", self.dims.proj_out, z.cols())));
        }
        Ok(())
    }

    /// Train-mode classifier forward with explicit dropout masks. Uses batch
    /// statistics but leaves the running estimates untouched; see
    /// [`ModelState::commit_bn_statistics`].
    pub fn classify_cached(&self, z: &Matrix, masks: DropoutMasks) -> Result<(Matrix, ClassifierCache)> {
        self.check_classifier_input(z)?;
        let c = &self.classifier;
        let input = apply_mask(z, masks.before_first.as_ref())?;
        let (n1, bn1) = c.bn1.forward_train(&c.first.forward(&input)?)?;
        let mut h1 = n1;
        tanh_in_place(&mut h1);
        let (n2, bn2) = c.bn2.forward_train(&c.second.forward(&h1)?)?;
        let mut h2 = n2;
        tanh_in_place(&mut h2);
        let h2_dropped = apply_mask(&h2, masks.before_output.as_ref())?;
        let probs = softmax_rows(&c.output.forward(&h2_dropped)?);
        let cache = ClassifierCache { input, bn1, h1, bn2, h2, h2_dropped, probs: probs.clone(), masks };
        Ok((probs, cache))
    }

    /// Backpropagates `dL/dprobs` through the classifier; returns `dL/dz`.
    pub fn classify_backward(
        &self,
        cache: &ClassifierCache,
        d_probs: &Matrix,
        grads: &mut Gradients,
    ) -> Result<Matrix> {
        let c = &self.classifier;
        let d_logits = softmax_backward(&cache.probs, d_probs)?;
        let d_h2_dropped = c.output.backward(&cache.h2_dropped, &d_logits, &mut grads.cls_output)?;
        let d_h2 = apply_mask(&d_h2_dropped, cache.masks.before_output.as_ref())?;
        let d_n2 = tanh_backward(&cache.h2, &d_h2)?;
        let d_a2 = c.bn2.backward(&cache.bn2, &d_n2, &mut grads.bn2)?;
        let d_h1 = c.second.backward(&cache.h1, &d_a2, &mut grads.cls_second)?;
        let d_n1 = tanh_backward(&cache.h1, &d_h1)?;
        let d_a1 = c.bn1.backward(&cache.bn1, &d_n1, &mut grads.bn1)?;
        let d_input = c.first.backward(&cache.input, &d_a1, &mut grads.cls_first)?;
        apply_mask(&d_input, cache.masks.before_first.as_ref())
    }

    /// Folds the batch statistics recorded in `cache` into both running estimates.
    pub fn commit_bn_statistics(&mut self, cache: &ClassifierCache) {
        let c = &mut self.classifier;
        c.bn1.update_running(&cache.bn1.batch_mean, &cache.bn1.batch_var);
        c.bn2.update_running(&cache.bn2.batch_mean, &cache.bn2.batch_var);
    }

    /// Trainable tensors: linear weights and biases, batch-norm `gamma`/`beta`.
    /// Running estimates are not parameters.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let (p, c) = (&self.projection, &self.classifier);
        vec![
            p.first.weight.data(),
            &p.first.bias,
            p.second.weight.data(),
            &p.second.bias,
            c.first.weight.data(),
            &c.first.bias,
            &c.bn1.gamma,
            &c.bn1.beta,
            c.second.weight.data(),
            &c.second.bias,
            &c.bn2.gamma,
            &c.bn2.beta,
            c.output.weight.data(),
            &c.output.bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let (p, c) = (&mut self.projection, &mut self.classifier);
        vec![
            p.first.weight.data_mut(),
            &mut p.first.bias,
            p.second.weight.data_mut(),
            &mut p.second.bias,
            c.first.weight.data_mut(),
            &mut c.first.bias,
            &mut c.bn1.gamma,
            &mut c.bn1.beta,
            c.second.weight.data_mut(),
            &mut c.second.bias,
            &mut c.bn2.gamma,
            &mut c.bn2.beta,
            c.output.weight.data_mut(),
            &mut c.output.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    pub fn flatten_parameters(&self) -> Vec<f64> {
        self.parameters().concat()
    }

    pub fn load_flat_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(shape(format!("{} values for {} parameters", flat.len(), self.parameter_count())));
        }
        let mut offset = 0;
        for t in self.parameters_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Index of the larger probability per row; ties go to class 0.
pub fn argmax_labels(probs: &Matrix) -> Vec<u8> {
    probs.iter_rows().map(|r| u8::from(r[1] > r[0])).collect()
}
