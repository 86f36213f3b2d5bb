use super::batches::BatchAssembler;
use super::config::TrainConfig;
use super::trace::{EpochRecord, TrainTrace};
use crate::data::{all_features, labels_of, LabeledRecord, UnlabeledRecord};
use crate::error::{data, numeric, Result};
use crate::losses::{cross_entropy_batch, LossComponents};
use crate::model::{objective_backward, objective_forward, AdamState, BnMode, ModelState, StepBatch, StepMasks};
use crate::numeric::SeededRng;

const SPLIT_STREAM: u64 = 10;
const BATCH_STREAM: u64 = 11;
const DROPOUT_STREAM: u64 = 12;

/// Loss values observed by one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub components: LossComponents,
    pub total: f64,
    pub sigma: f64,
}

/// Forward, backward and one Adam update on the weighted objective.
///
/// Batch-norm running estimates are updated from both classifier passes
/// (source anchors, then source augments).
pub fn train_step(
    model: &mut ModelState,
    opt: &mut AdamState,
    batch: &StepBatch,
    cfg: &TrainConfig,
    dropout_rng: &mut SeededRng,
) -> Result<StepOutcome> {
    let masks = StepMasks::sample(dropout_rng, model, batch.source.len())?;
    let pass = objective_forward(model, batch, &masks, &cfg.loss_weights, cfg.symmetrize_contrastive)?;
    if !pass.total.is_finite() {
        return Err(numeric(format!("non-finite objective: {:?}", pass.components)));
    }
    let grads = objective_backward(model, &pass)?;
    let grad_tensors = grads.tensors();
    if grad_tensors.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(numeric(format!("non-finite gradient at loss components {:?}", pass.components)));
    }
    for cache in pass.classifier_caches() {
        model.commit_bn_statistics(cache);
    }
    opt.step(&mut model.parameters_mut(), &grad_tensors)?;
    Ok(StepOutcome { components: pass.components, total: pass.total, sigma: pass.sigma })
}

/// Patience-based early stopping on a loss to be minimized.
///
/// Stops once the loss has failed to improve for more than `patience`
/// consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since_best: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best; the caller should snapshot the model.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: None, since_best: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.since_best = 0;
            StopDecision::Improved
        } else {
            self.since_best += 1;
            if self.since_best > self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// Eval-mode cross-entropy of `model` on labeled records.
pub fn validation_ce(model: &ModelState, records: &[LabeledRecord]) -> Result<f64> {
    let probs = model.predict_proba(&all_features(records)?)?;
    let p1: Vec<f64> = probs.iter_rows().map(|r| r[1]).collect();
    cross_entropy_batch(&p1, &labels_of(records))
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: ModelState,
    pub trace: TrainTrace,
}

/// Seeded hold-out of `fraction` of the source records for validation.
pub fn split_validation(
    source: &[LabeledRecord],
    fraction: f64,
    seed: u64,
) -> (Vec<LabeledRecord>, Vec<LabeledRecord>) {
    let n_val = (source.len() as f64 * fraction).round() as usize;
    let order = SeededRng::with_stream(seed, SPLIT_STREAM).permutation(source.len());
    let mut is_val = vec![false; source.len()];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (r, v) in source.iter().zip(is_val) {
        if v { val.push(r.clone()) } else { train.push(r.clone()) }
    }
    (train, val)
}

/// Trains `model` on labeled source and unlabeled target records.
///
/// Early stopping watches cross-entropy on a seeded source hold-out; the
/// parameters (and batch-norm estimates) of the best epoch are returned with
/// batch norm in eval mode. Without a hold-out the last epoch is returned.
pub fn fit(
    model: ModelState,
    source: &[LabeledRecord],
    target: &[UnlabeledRecord],
    cfg: &TrainConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    let mut trace = TrainTrace::default();
    if cfg.max_epochs == 0 {
        return Ok(FitOutcome { model, trace });
    }
    let (train, val) = split_validation(source, cfg.validation_fraction, cfg.seed);
    if train.len() < 2 {
        return Err(data("need at least two source training records"));
    }
    let mut assembler = BatchAssembler::new(&train, target, cfg.batch_size, cfg.augment_std)?;
    let mut batch_rng = SeededRng::with_stream(cfg.seed, BATCH_STREAM);
    let mut dropout_rng = SeededRng::with_stream(cfg.seed, DROPOUT_STREAM);
    let mut model = model;
    model.set_bn_mode(BnMode::Train);
    let mut opt = AdamState::for_tensors(&model.parameters(), cfg.learning_rate)?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<ModelState> = None;

    for epoch in 1..=cfg.max_epochs {
        let plan = assembler.epoch_plan(&mut batch_rng);
        let mut sums = [0.0; 6];
        for idx in &plan {
            let batch = assembler.step(idx, &mut batch_rng)?;
            let out = train_step(&mut model, &mut opt, &batch, cfg, &mut dropout_rng)?;
            let c = out.components;
            for (s, v) in sums.iter_mut().zip([out.total, c.ce_source, c.ce_augment, c.ctr_source, c.ctr_target, c.mmd]) {
                *s += v;
            }
        }
        let steps = plan.len() as f64;
        let val_ce = if val.is_empty() { f64::NAN } else { validation_ce(&model, &val)? };
        trace.epochs.push(EpochRecord {
            epoch,
            total: sums[0] / steps,
            ce_source: sums[1] / steps,
            ce_augment: sums[2] / steps,
            ctr_source: sums[3] / steps,
            ctr_target: sums[4] / steps,
            mmd: sums[5] / steps,
            val_ce,
        });
        if val.is_empty() {
            continue;
        }
        match stopper.observe(epoch, val_ce) {
            StopDecision::Improved => best = Some(model.clone()),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                trace.early_stop_epoch = Some(epoch);
                break;
            }
        }
    }
    let mut out = match best {
        Some(m) => {
            trace.best_epoch = stopper.best_epoch();
            m
        }
        None => {
            trace.best_epoch = trace.epochs.last().map(|e| e.epoch);
            model
        }
    };
    out.set_bn_mode(BnMode::Eval);
    Ok(FitOutcome { model: out, trace })
}
