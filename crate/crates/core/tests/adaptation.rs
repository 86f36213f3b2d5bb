use conda_tta::adapt::{fit, tta_adapt, TrainConfig};
use conda_tta::data::{all_features, generate_synthetic, partition, DomainPartition, EmbeddingRecord, SyntheticSpec, TargetSplit};
use conda_tta::eval::{evaluate, synthetic_benchmark};
use conda_tta::model::{Checkpoint, ModelDims, ModelState};

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec { samples_per_domain: 300, dim: 8, seed, ..SyntheticSpec::default() }
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig { batch_size: 64, max_epochs: 3, tta_batch_size: 64, seed, ..TrainConfig::default() }
}

fn domains() -> DomainPartition {
    DomainPartition::new(["domain0", "domain1"], ["domain2"]).unwrap()
}

fn train_and_adapt(records: Vec<EmbeddingRecord>, seed: u64) -> (String, String, Vec<u8>) {
    let split = partition(records, &domains(), TargetSplit::new(0.2, seed).unwrap()).unwrap();
    let model = ModelState::new(ModelDims::compact(8), seed).unwrap();
    let trained = fit(model, &split.source, &split.target_train, &small_config(seed)).unwrap().model;
    let features = all_features(&split.target_test).unwrap();
    let (adapted, _) = tta_adapt(&trained, &features, 64, 1).unwrap();
    (
        Checkpoint::new(trained).to_json().unwrap(),
        Checkpoint::new(adapted.clone()).to_json().unwrap(),
        adapted.predict(&features).unwrap(),
    )
}

#[test]
fn target_labels_do_not_influence_training_or_adaptation() {
    let clean = generate_synthetic(&small_spec(4)).unwrap();
    let mut poisoned = clean.clone();
    for r in poisoned.iter_mut().filter(|r| r.domain == "domain2") {
        r.label = r.label.map(|l| 1 - l);
    }
    let mut unlabeled = clean.clone();
    for r in unlabeled.iter_mut().filter(|r| r.domain == "domain2") {
        r.label = Some(1);
    }
    let reference = train_and_adapt(clean, 4);
    assert_eq!(train_and_adapt(poisoned, 4), reference);
    assert_eq!(train_and_adapt(unlabeled, 4), reference);
}

#[test]
fn fit_is_bit_reproducible() {
    let records = generate_synthetic(&small_spec(9)).unwrap();
    assert_eq!(train_and_adapt(records.clone(), 9), train_and_adapt(records, 9));
}

#[test]
fn different_seeds_give_different_models() {
    let records = generate_synthetic(&small_spec(9)).unwrap();
    assert_ne!(train_and_adapt(records.clone(), 9).0, train_and_adapt(records, 10).0);
}

#[test]
fn zero_epochs_returns_the_initial_model() {
    let (_, split) = synthetic_benchmark(&small_spec(1), 0.2).unwrap();
    let model = ModelState::new(ModelDims::compact(8), 1).unwrap();
    let cfg = TrainConfig { max_epochs: 0, ..small_config(1) };
    let out = fit(model.clone(), &split.source, &split.target_train, &cfg).unwrap();
    assert!(out.trace.epochs.is_empty());
    assert_eq!(Checkpoint::new(out.model).to_json().unwrap(), Checkpoint::new(model).to_json().unwrap());
}

#[test]
fn total_loss_falls_over_five_epochs() {
    let mut monotone = 0;
    for seed in 0..5 {
        let (_, split) = synthetic_benchmark(&SyntheticSpec { samples_per_domain: 600, seed, ..SyntheticSpec::default() }, 0.2).unwrap();
        let model = ModelState::new(ModelDims::compact(32), seed).unwrap();
        let cfg = TrainConfig { batch_size: 128, max_epochs: 5, patience: 10, seed, ..TrainConfig::default() };
        let trace = fit(model, &split.source, &split.target_train, &cfg).unwrap().trace;
        assert_eq!(trace.epochs.len(), 5);
        if trace.epochs.windows(2).all(|w| w[1].total < w[0].total) {
            monotone += 1;
        }
    }
    assert!(monotone >= 4, "monotone decrease in {monotone} of 5 seeds");
}

#[test]
fn tta_on_in_distribution_data_barely_changes_predictions() {
    let mut changed = 0usize;
    let mut total = 0usize;
    for seed in 0..5 {
        let spec = SyntheticSpec { shift: 0.0, samples_per_domain: 500, dim: 8, seed, ..SyntheticSpec::default() };
        let (_, split) = synthetic_benchmark(&spec, 0.4).unwrap();
        let model = ModelState::new(ModelDims::compact(8), seed).unwrap();
        let cfg = TrainConfig { batch_size: 64, max_epochs: 4, seed, ..TrainConfig::default() };
        let trained = fit(model, &split.source, &split.target_train, &cfg).unwrap().model;
        let x = all_features(&split.target_test).unwrap();
        let before = trained.predict(&x).unwrap();
        let (adapted, _) = tta_adapt(&trained, &x, 64, 1).unwrap();
        let after = adapted.predict(&x).unwrap();
        changed += before.iter().zip(&after).filter(|(a, b)| a != b).count();
        total += before.len();
    }
    let rate = changed as f64 / total as f64;
    assert!(rate < 0.02, "{changed} of {total} predictions changed");
}

#[test]
fn repeated_tta_moves_estimates_toward_the_target_statistics() {
    let (_, split) = synthetic_benchmark(&small_spec(2), 0.5).unwrap();
    let model = ModelState::new(ModelDims::compact(8), 2).unwrap();
    let trained = fit(model, &split.source, &split.target_train, &small_config(2)).unwrap().model;
    let x = all_features(&split.target_test).unwrap();
    // The first batch-norm layer sees the first linear layer's output, which
    // does not depend on batch-norm state; its full-set mean is the target.
    let pre = trained.classifier.first.forward(&trained.project(&x).unwrap()).unwrap();
    let target = pre.column_means();
    let dist = |m: &ModelState| -> f64 {
        m.classifier.bn1.running_mean.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };
    // One batch spanning the whole set: each pass contracts the error by 1 - momentum.
    let mut last = dist(&trained);
    for passes in 1..=6 {
        let (m, _) = tta_adapt(&trained, &x, x.rows(), passes).unwrap();
        let d = dist(&m);
        assert!(d < last, "pass {passes}: {d} >= {last}");
        last = d;
    }
    let (one, _) = tta_adapt(&trained, &x, 32, 1).unwrap();
    let (many, _) = tta_adapt(&trained, &x, 32, 10).unwrap();
    assert!(dist(&many) < dist(&one));
}

#[test]
fn evaluation_requires_test_records() {
    let model = ModelState::new(ModelDims::compact(8), 0).unwrap();
    assert!(matches!(evaluate(&model, &[]), Err(conda_tta::Error::Data(_))));
}
