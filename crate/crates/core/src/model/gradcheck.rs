use serde::{Deserialize, Serialize};

use super::network::{ModelDims, ModelState};
use super::objective::{objective_backward, objective_forward, objective_value, resolve_sigma, StepBatch, StepMasks};
use crate::error::{param, Result};
use crate::losses::{LossWeights, PairedBatch, SigmaPolicy};
use crate::numeric::{finite_diff_grad, relative_error, Matrix, SeededRng};

/// Central-difference step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;
/// Largest layer width a gradient check accepts.
pub const GRAD_CHECK_MAX_WIDTH: usize = 16;

/// A frozen objective: batch, dropout masks, weights and a fixed kernel bandwidth.
#[derive(Clone, Debug)]
pub struct GradCheckInput {
    pub batch: StepBatch,
    pub masks: StepMasks,
    pub weights: LossWeights,
    pub symmetrize: bool,
}

impl GradCheckInput {
    /// Small random configuration: widths ≤ 16, batch of 4, dropout 0.2 with
    /// frozen masks, default loss weights.
    pub fn toy(seed: u64) -> Result<(ModelState, Self)> {
        let dims = ModelDims { input: 6, proj_hidden: 5, proj_out: 4, cls_hidden: 5 };
        let model = ModelState::new(dims, seed)?;
        let mut rng = SeededRng::with_stream(seed, 1);
        let b = 4;
        let mut draw = |shift: f64| -> Result<Matrix> { Matrix::new(b, dims.input, rng.gaussian_sample(b * dims.input, shift, 1.0)?) };
        let xs = draw(0.0)?;
        let xs_aug = xs.add(&draw(0.0)?.scale(0.1))?;
        let xt = draw(0.7)?;
        let xt_aug = xt.add(&draw(0.0)?.scale(0.1))?;
        let batch = StepBatch::new(PairedBatch::new(xs, xs_aug)?, vec![0, 1, 1, 0], PairedBatch::new(xt, xt_aug)?)?;
        let masks = StepMasks::sample(&mut rng, &model, b)?;
        Ok((model, Self { batch, masks, weights: LossWeights::default(), symmetrize: false }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    /// Flat index of the parameter with the largest error.
    pub worst_parameter: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares two flat gradients element-wise.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> Result<GradCheckReport> {
    if analytic.len() != numeric.len() {
        return Err(param("gradient vectors differ in length"));
    }
    let mut worst = (0.0_f64, 0usize);
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let err = relative_error(*a, *n, GRAD_CHECK_FLOOR);
        if err > worst.0 || err.is_nan() {
            worst = (err, i);
        }
    }
    Ok(GradCheckReport {
        parameters_checked: analytic.len(),
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        tolerance,
        passed: worst.0 <= tolerance,
    })
}

fn check_widths(model: &ModelState) -> Result<()> {
    let d = model.dims;
    if [d.input, d.proj_hidden, d.proj_out, d.cls_hidden].iter().any(|&w| w > GRAD_CHECK_MAX_WIDTH) {
        return Err(param(format!("gradient check needs widths <= {GRAD_CHECK_MAX_WIDTH}, got {d:?}")));
    }
    Ok(())
}

/// Analytic gradient of the objective, flattened in parameter order, with the
/// kernel bandwidth resolved once at the current parameters.
pub fn analytic_gradient(model: &ModelState, input: &GradCheckInput) -> Result<(Vec<f64>, LossWeights)> {
    let weights = frozen_weights(model, input)?;
    let pass = objective_forward(model, &input.batch, &input.masks, &weights, input.symmetrize)?;
    Ok((objective_backward(model, &pass)?.flatten(), weights))
}

fn frozen_weights(model: &ModelState, input: &GradCheckInput) -> Result<LossWeights> {
    let mut weights = input.weights;
    if weights.sigma == SigmaPolicy::MedianHeuristic {
        let zs = model.project(input.batch.source.anchors())?;
        let zt = model.project(input.batch.target.anchors())?;
        weights.sigma = SigmaPolicy::Fixed(resolve_sigma(SigmaPolicy::MedianHeuristic, &zs, &zt)?);
    }
    Ok(weights)
}

/// Central-difference gradient of the same frozen objective.
pub fn numeric_gradient(model: &ModelState, input: &GradCheckInput, weights: &LossWeights) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    finite_diff_grad(
        |flat| {
            probe.load_flat_parameters(flat)?;
            objective_value(&probe, &input.batch, &input.masks, weights, input.symmetrize)
        },
        &model.flatten_parameters(),
        GRAD_CHECK_STEP,
    )
}

/// Max relative error between analytic and finite-difference gradients over
/// every trainable parameter; passes iff it is `<= tolerance`.
pub fn grad_check(model: &ModelState, input: &GradCheckInput, tolerance: f64) -> Result<GradCheckReport> {
    check_widths(model)?;
    let (analytic, weights) = analytic_gradient(model, input)?;
    let numeric = numeric_gradient(model, input, &weights)?;
    compare_gradients(&analytic, &numeric, tolerance)
}
