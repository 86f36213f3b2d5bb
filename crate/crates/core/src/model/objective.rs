//! The composite training objective: cross-entropy on source anchors and
//! their augmentations, contrastive losses on source and target pairs,
//! and MMD between projected source and target anchors.

use super::network::{ClassifierCache, DropoutMasks, Gradients, ModelState, ProjectionCache};
use crate::error::{param, shape, Result};
use crate::losses::{
    contrastive_loss_with_grad, cross_entropy_batch_with_grad, empirical_mmd_with_grad, median_heuristic_sigma,
    LossComponents, LossWeights, PairedBatch, SigmaPolicy,
};
use crate::numeric::{Matrix, SeededRng};

/// One optimization step's inputs: labeled source pairs and unlabeled target pairs.
#[derive(Clone, Debug)]
pub struct StepBatch {
    pub source: PairedBatch,
    pub labels: Vec<u8>,
    pub target: PairedBatch,
}

impl StepBatch {
    pub fn new(source: PairedBatch, labels: Vec<u8>, target: PairedBatch) -> Result<Self> {
        if labels.len() != source.len() {
            return Err(shape(format!("{} labels for {} source rows", labels.len(), source.len())));
        }
        if source.is_empty() || target.is_empty() {
            return Err(param("step batch needs source and target rows"));
        }
        Ok(Self { source, labels, target })
    }
}

/// Dropout masks for the two classifier passes of a step.
#[derive(Clone, Debug, Default)]
pub struct StepMasks {
    pub source: DropoutMasks,
    pub source_augment: DropoutMasks,
}

impl StepMasks {
    pub fn sample(rng: &mut SeededRng, model: &ModelState, rows: usize) -> Result<Self> {
        let rate = model.classifier.dropout;
        Ok(Self {
            source: DropoutMasks::sample(rng, rows, &model.dims, rate)?,
            source_augment: DropoutMasks::sample(rng, rows, &model.dims, rate)?,
        })
    }
}

/// Everything a forward pass of the objective records for its backward pass.
#[derive(Clone, Debug)]
pub struct ObjectivePass {
    pub components: LossComponents,
    pub total: f64,
    /// Kernel bandwidth the MMD term used.
    pub sigma: f64,
    weights: LossWeights,
    proj: [ProjectionCache; 4],
    cls_source: ClassifierCache,
    cls_augment: ClassifierCache,
    d_ce_source: Vec<f64>,
    d_ce_augment: Vec<f64>,
    d_ctr_source: (Matrix, Matrix),
    d_ctr_target: (Matrix, Matrix),
    d_mmd: (Matrix, Matrix),
}

impl ObjectivePass {
    pub fn classifier_caches(&self) -> [&ClassifierCache; 2] {
        [&self.cls_source, &self.cls_augment]
    }
}

pub fn resolve_sigma(policy: SigmaPolicy, zs: &Matrix, zt: &Matrix) -> Result<f64> {
    match policy {
        SigmaPolicy::Fixed(s) => Ok(s),
        SigmaPolicy::MedianHeuristic => median_heuristic_sigma(&zs.vstack(zt)?),
    }
}

fn positive_column(probs: &Matrix) -> Vec<f64> {
    probs.iter_rows().map(|r| r[1]).collect()
}

/// Forward pass of the objective with train-mode batch norm. Running estimates
/// are not modified; see [`ModelState::commit_bn_statistics`].
pub fn objective_forward(
    model: &ModelState,
    batch: &StepBatch,
    masks: &StepMasks,
    weights: &LossWeights,
    symmetrize: bool,
) -> Result<ObjectivePass> {
    weights.validate()?;
    let (zs, ps) = model.project_cached(batch.source.anchors())?;
    let (zs_aug, ps_aug) = model.project_cached(batch.source.augments())?;
    let (zt, pt) = model.project_cached(batch.target.anchors())?;
    let (zt_aug, pt_aug) = model.project_cached(batch.target.augments())?;

    let (ctr_source, ds_a, ds_p) =
        contrastive_loss_with_grad(&PairedBatch::new(zs.clone(), zs_aug.clone())?, weights.temperature, symmetrize)?;
    let (ctr_target, dt_a, dt_p) =
        contrastive_loss_with_grad(&PairedBatch::new(zt.clone(), zt_aug)?, weights.temperature, symmetrize)?;

    let sigma = resolve_sigma(weights.sigma, &zs, &zt)?;
    let (mmd, d_mmd_s, d_mmd_t) = empirical_mmd_with_grad(&zs, &zt, sigma)?;

    let (probs_s, cls_source) = model.classify_cached(&zs, masks.source.clone())?;
    let (probs_a, cls_augment) = model.classify_cached(&zs_aug, masks.source_augment.clone())?;
    let (ce_source, d_ce_source) = cross_entropy_batch_with_grad(&positive_column(&probs_s), &batch.labels)?;
    let (ce_augment, d_ce_augment) = cross_entropy_batch_with_grad(&positive_column(&probs_a), &batch.labels)?;

    let components = LossComponents { ce_source, ce_augment, ctr_source, ctr_target, mmd };
    let total = components.total(weights)?;
    Ok(ObjectivePass {
        components,
        total,
        sigma,
        weights: *weights,
        proj: [ps, ps_aug, pt, pt_aug],
        cls_source,
        cls_augment,
        d_ce_source,
        d_ce_augment,
        d_ctr_source: (ds_a, ds_p),
        d_ctr_target: (dt_a, dt_p),
        d_mmd: (d_mmd_s, d_mmd_t),
    })
}

/// Exact reverse-mode gradients of the weighted objective recorded in `pass`.
pub fn objective_backward(model: &ModelState, pass: &ObjectivePass) -> Result<Gradients> {
    let w = &pass.weights;
    let half_ce = 0.5 * w.lambda_ce;
    let half_ctr = 0.5 * w.lambda_ctr;
    let mut grads = Gradients::zeros_like(model);

    let ce_upstream = |d: &[f64]| {
        let mut m = Matrix::zeros(d.len(), 2);
        for (r, g) in d.iter().enumerate() {
            m.set(r, 1, half_ce * g);
        }
        m
    };
    let dz_cls_s = model.classify_backward(&pass.cls_source, &ce_upstream(&pass.d_ce_source), &mut grads)?;
    let dz_cls_a = model.classify_backward(&pass.cls_augment, &ce_upstream(&pass.d_ce_augment), &mut grads)?;

    let mut dz_s = dz_cls_s;
    dz_s.add_assign(&pass.d_ctr_source.0.scale(half_ctr))?;
    dz_s.add_assign(&pass.d_mmd.0.scale(w.lambda_mmd))?;
    let mut dz_a = dz_cls_a;
    dz_a.add_assign(&pass.d_ctr_source.1.scale(half_ctr))?;
    let mut dz_t = pass.d_ctr_target.0.scale(half_ctr);
    dz_t.add_assign(&pass.d_mmd.1.scale(w.lambda_mmd))?;
    let dz_t_aug = pass.d_ctr_target.1.scale(half_ctr);

    for (cache, dz) in pass.proj.iter().zip([&dz_s, &dz_a, &dz_t, &dz_t_aug]) {
        model.project_backward(cache, dz, &mut grads)?;
    }
    Ok(grads)
}

/// Objective value only; the function finite differences probe.
pub fn objective_value(
    model: &ModelState,
    batch: &StepBatch,
    masks: &StepMasks,
    weights: &LossWeights,
    symmetrize: bool,
) -> Result<f64> {
    Ok(objective_forward(model, batch, masks, weights, symmetrize)?.total)
}
