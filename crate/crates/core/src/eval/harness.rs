use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{evaluate, EvalReport};
use crate::adapt::{fit, tta_adapt, TrainConfig, TrainTrace, TtaReport};
use crate::data::{
    all_features, domain_name, generate_synthetic, partition, DomainPartition, EmbeddingRecord, LabeledRecord,
    PartitionedData, SyntheticSpec, TargetSplit,
};
use crate::error::{data, Result};
use crate::model::{ModelDims, ModelState};

/// Everything that determines one train/adapt/evaluate run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub dims: ModelDims,
    /// Whether test-time adaptation runs before evaluation.
    pub tta: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { train: TrainConfig::default(), dims: ModelDims::REFERENCE, tta: true }
    }
}

impl RunConfig {
    /// Hex SHA-256 of the JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn with_weights(mut self, lambda_ctr: f64, lambda_mmd: f64) -> Self {
        self.train.loss_weights.lambda_ctr = lambda_ctr;
        self.train.loss_weights.lambda_mmd = lambda_mmd;
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Model as evaluated (after test-time adaptation when enabled).
    pub model: ModelState,
    pub trace: TrainTrace,
    /// `None` when test-time adaptation was skipped.
    pub tta: Option<TtaReport>,
    pub report: EvalReport,
}

/// Initializes a model from `cfg` and fits it.
pub fn train_model(cfg: &RunConfig, source: &[LabeledRecord], data: &PartitionedData) -> Result<(ModelState, TrainTrace)> {
    let model = ModelState::new(cfg.dims, cfg.train.seed)?;
    let out = fit(model, source, &data.target_train, &cfg.train)?;
    Ok((out.model, out.trace))
}

/// Optionally adapts a trained model on the target test features, then evaluates it.
pub fn adapt_and_evaluate(
    cfg: &RunConfig,
    trained: ModelState,
    trace: TrainTrace,
    data: &PartitionedData,
) -> Result<RunOutcome> {
    let (model, tta) = if cfg.tta {
        let features = all_features(&data.target_test)?;
        let (m, r) = tta_adapt(&trained, &features, cfg.train.tta_batch_size, cfg.train.tta_passes)?;
        (m, Some(r))
    } else {
        (trained, None)
    };
    let report = evaluate(&model, &data.target_test)?.with_metadata(cfg.train.seed, cfg.hash());
    Ok(RunOutcome { model, trace, tta, report })
}

/// Fit on the source and unlabeled target, adapt, evaluate on the target test set.
pub fn run_pipeline(cfg: &RunConfig, data: &PartitionedData) -> Result<RunOutcome> {
    let (model, trace) = train_model(cfg, &data.source, data)?;
    adapt_and_evaluate(cfg, model, trace, data)
}

/// Supervised source training only: no contrastive or MMD terms, no test-time adaptation.
pub fn source_only(cfg: &RunConfig, data: &PartitionedData) -> Result<RunOutcome> {
    let mut cfg = cfg.with_weights(0.0, 0.0);
    cfg.tta = false;
    run_pipeline(&cfg, data)
}

/// Supervised training on the source plus the labeled target training split,
/// followed by the same test-time procedure as `cfg`.
pub fn upper_bound(cfg: &RunConfig, data: &PartitionedData, target_train_labeled: &[LabeledRecord]) -> Result<RunOutcome> {
    let cfg = cfg.with_weights(0.0, 0.0);
    let mut pool = data.source.clone();
    pool.extend_from_slice(target_train_labeled);
    let (model, trace) = train_model(&cfg, &pool, data)?;
    adapt_and_evaluate(&cfg, model, trace, data)
}

/// Labeled copies of the target training records, looked up by id in the raw records.
///
/// Only for reference runs; the adaptation pipeline never sees these labels.
pub fn target_train_labels(records: &[EmbeddingRecord], split: &PartitionedData) -> Result<Vec<LabeledRecord>> {
    let by_id: BTreeMap<&str, &EmbeddingRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    split
        .target_train
        .iter()
        .map(|t| {
            by_id
                .get(t.id.as_str())
                .ok_or_else(|| data(format!("target record {} not found", t.id)))
                .and_then(|r| (*r).clone().into_labeled())
        })
        .collect()
}

/// Synthetic records with every domain but the last as source and the last as target.
pub fn synthetic_benchmark(spec: &SyntheticSpec, test_fraction: f64) -> Result<(Vec<EmbeddingRecord>, PartitionedData)> {
    if spec.n_domains < 2 {
        return Err(data("benchmark needs at least two domains"));
    }
    let records = generate_synthetic(spec)?;
    let domains = DomainPartition::new((0..spec.n_domains - 1).map(domain_name), [domain_name(spec.n_domains - 1)])?;
    let split = partition(records.clone(), &domains, TargetSplit::new(test_fraction, spec.seed)?)?;
    Ok((records, split))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoContrastive,
    NoMmd,
    NoTta,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [Self::Full, Self::NoContrastive, Self::NoMmd, Self::NoTta];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Number of batches pushed through test-time adaptation; 0 when it was skipped.
    pub tta_batches: usize,
}

impl AblationRow {
    pub fn new(variant: AblationVariant, run: &RunOutcome) -> Self {
        let c = run.report.confusion;
        Self {
            variant,
            f1: run.report.f1,
            accuracy: run.report.accuracy,
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            tta_batches: run.tta.map_or(0, |r| r.batches),
        }
    }
}

/// Writes rows of any serializable table as CSV with a header.
pub fn write_table<T: Serialize>(rows: &[T], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_table<T: for<'de> Deserialize<'de>>(r: impl Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Full model and the three single-component ablations, all sharing one seed.
///
/// The model without test-time adaptation is the trained full model evaluated
/// directly: training is deterministic, so refitting would reproduce it bit for bit.
pub fn run_ablation_runs(cfg: &RunConfig, data: &PartitionedData) -> Result<Vec<(AblationVariant, RunOutcome)>> {
    let mut full_cfg = *cfg;
    full_cfg.tta = true;
    let w = cfg.train.loss_weights;
    let jobs = [
        full_cfg,
        full_cfg.with_weights(0.0, w.lambda_mmd),
        full_cfg.with_weights(w.lambda_ctr, 0.0),
    ];
    let trained: Vec<(ModelState, TrainTrace)> =
        jobs.par_iter().map(|c| train_model(c, &data.source, data)).collect::<Result<_>>()?;
    let mut no_tta_cfg = full_cfg;
    no_tta_cfg.tta = false;
    let runs = [
        (AblationVariant::Full, &jobs[0], &trained[0]),
        (AblationVariant::NoContrastive, &jobs[1], &trained[1]),
        (AblationVariant::NoMmd, &jobs[2], &trained[2]),
        (AblationVariant::NoTta, &no_tta_cfg, &trained[0]),
    ];
    runs.iter().map(|(v, c, (m, t))| Ok((*v, adapt_and_evaluate(c, m.clone(), t.clone(), data)?))).collect()
}

/// [`run_ablation_runs`] reduced to its table.
pub fn run_ablation(cfg: &RunConfig, data: &PartitionedData) -> Result<Vec<AblationRow>> {
    Ok(run_ablation_runs(cfg, data)?.iter().map(|(v, r)| AblationRow::new(*v, r)).collect())
}

/// Values swept one dimension at a time around the base configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub lambda_mmd: Vec<f64>,
    pub lambda_ctr: Vec<f64>,
    pub tta_batch: Vec<usize>,
}

impl Default for SensitivityGrid {
    fn default() -> Self {
        Self { lambda_mmd: vec![0.5, 1.0, 2.0, 5.0], lambda_ctr: vec![0.1, 0.5, 1.0, 2.0], tta_batch: vec![64, 128, 256, 512] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `lambda_mmd`, `lambda_ctr` or `tta_batch`.
    pub parameter: String,
    pub value: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Runs the three one-dimensional sweeps; rows follow grid order.
///
/// Every loss-weight point is an independent run and may execute in
/// parallel. The TTA batch sweep adapts one shared trained model.
pub fn run_sensitivity(cfg: &RunConfig, data: &PartitionedData, grid: &SensitivityGrid) -> Result<Vec<SweepRow>> {
    let mut jobs: Vec<(&str, f64, RunConfig)> = Vec::new();
    for &v in &grid.lambda_mmd {
        let mut c = *cfg;
        c.train.loss_weights.lambda_mmd = v;
        jobs.push(("lambda_mmd", v, c));
    }
    for &v in &grid.lambda_ctr {
        let mut c = *cfg;
        c.train.loss_weights.lambda_ctr = v;
        jobs.push(("lambda_ctr", v, c));
    }
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(p, v, c)| {
            let r = run_pipeline(c, data)?.report;
            Ok(SweepRow { parameter: p.to_string(), value: *v, accuracy: r.accuracy, f1: r.f1 })
        })
        .collect::<Result<_>>()?;
    if !grid.tta_batch.is_empty() {
        let (model, trace) = train_model(cfg, &data.source, data)?;
        let tta_rows: Vec<SweepRow> = grid
            .tta_batch
            .par_iter()
            .map(|&b| {
                let mut c = *cfg;
                c.tta = true;
                c.train.tta_batch_size = b;
                let r = adapt_and_evaluate(&c, model.clone(), trace.clone(), data)?.report;
                Ok(SweepRow { parameter: "tta_batch".into(), value: b as f64, accuracy: r.accuracy, f1: r.f1 })
            })
            .collect::<Result<_>>()?;
        rows.extend(tta_rows);
    }
    Ok(rows)
}
