use super::augment::augment_matrix;
use crate::data::{feature_matrix, LabeledRecord, UnlabeledRecord};
use crate::error::{data, param, Result};
use crate::losses::PairedBatch;
use crate::model::StepBatch;
use crate::numeric::SeededRng;

/// Builds per-step source/target batches with their augmentations.
///
/// An epoch is one shuffled pass over the source pool. The target pool is
/// consumed in lock-step and reshuffled each time it runs out, so every step
/// has equally many source and target rows. A trailing source chunk of a
/// single row is dropped (train-mode batch norm needs two rows).
pub struct BatchAssembler<'a> {
    source: &'a [LabeledRecord],
    target: &'a [UnlabeledRecord],
    batch_size: usize,
    augment_std: f64,
    target_order: Vec<usize>,
    target_cursor: usize,
    target_cycles: usize,
}

impl<'a> BatchAssembler<'a> {
    pub fn new(
        source: &'a [LabeledRecord],
        target: &'a [UnlabeledRecord],
        batch_size: usize,
        augment_std: f64,
    ) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(data("source and target pools must be non-empty"));
        }
        if batch_size < 2 {
            return Err(param("batch size must be >= 2"));
        }
        Ok(Self {
            source,
            target,
            batch_size,
            augment_std,
            target_order: Vec::new(),
            target_cursor: 0,
            target_cycles: 0,
        })
    }

    /// How many times the target pool has been (re)shuffled so far.
    pub fn target_cycles(&self) -> usize {
        self.target_cycles
    }

    fn next_target(&mut self, n: usize, rng: &mut SeededRng) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.target_cursor == self.target_order.len() {
                self.target_order = rng.permutation(self.target.len());
                self.target_cursor = 0;
                self.target_cycles += 1;
            }
            let take = (n - out.len()).min(self.target_order.len() - self.target_cursor);
            out.extend_from_slice(&self.target_order[self.target_cursor..self.target_cursor + take]);
            self.target_cursor += take;
        }
        out
    }

    /// Source row indices of the next epoch, chunked into steps.
    pub fn epoch_plan(&self, rng: &mut SeededRng) -> Vec<Vec<usize>> {
        let order = rng.permutation(self.source.len());
        order.chunks(self.batch_size).filter(|c| c.len() >= 2).map(<[usize]>::to_vec).collect()
    }

    /// Materializes one step: source anchors/augments with labels, target anchors/augments.
    pub fn step(&mut self, source_idx: &[usize], rng: &mut SeededRng) -> Result<StepBatch> {
        let target_idx = self.next_target(source_idx.len(), rng);
        let xs = feature_matrix(self.source, source_idx.iter().copied())?;
        let xt = feature_matrix(self.target, target_idx.iter().copied())?;
        let xs_aug = augment_matrix(&xs, self.augment_std, rng)?;
        let xt_aug = augment_matrix(&xt, self.augment_std, rng)?;
        let labels = source_idx.iter().map(|&i| self.source[i].label).collect();
        StepBatch::new(PairedBatch::new(xs, xs_aug)?, labels, PairedBatch::new(xt, xt_aug)?)
    }

    /// All steps of the next epoch.
    pub fn epoch(&mut self, rng: &mut SeededRng) -> Result<Vec<StepBatch>> {
        let plan = self.epoch_plan(rng);
        plan.iter().map(|idx| self.step(idx, rng)).collect()
    }
}
