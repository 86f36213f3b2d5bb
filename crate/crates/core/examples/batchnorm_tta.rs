//! Batch-norm running estimates under test-time adaptation: a classifier
//! trained on one domain is re-normalized on a shifted domain without
//! touching any weight.
//!
//! Run with `cargo run --release --example batchnorm_tta`.

use conda_tta::adapt::{fit, tta_adapt, TrainConfig};
use conda_tta::data::{all_features, LabeledRecord, UnlabeledRecord};
use conda_tta::eval::evaluate;
use conda_tta::model::{BatchNormState, BnMode, ModelDims, ModelState};
use conda_tta::numeric::{Matrix, SeededRng};

fn blobs(rng: &mut SeededRng, n: usize, shift: f64, domain: &str) -> anyhow::Result<Vec<LabeledRecord>> {
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let center = if label == 1 { 1.5 } else { -1.5 };
            let mut f = rng.gaussian_sample(4, 0.0, 1.0)?;
            f[0] += center + shift;
            f[1] += shift;
            Ok(LabeledRecord { id: format!("{domain}-{i}"), domain: domain.into(), label, features: f })
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    // The running-mean recurrence on a constant input converges geometrically.
    let mut bn = BatchNormState::new(1).with_momentum(0.1)?;
    let constant = Matrix::filled(8, 1, 5.0);
    print!("running mean on constant 5.0 input:");
    for step in 1..=30 {
        bn.bn_forward(&constant)?;
        if step % 5 == 0 {
            print!(" {:.3}", bn.running_mean[0]);
        }
    }
    println!();

    let mut rng = SeededRng::new(5);
    let source = blobs(&mut rng, 1200, 0.0, "source")?;
    let target = blobs(&mut rng, 600, 2.0, "target")?;
    let unlabeled: Vec<UnlabeledRecord> = target.iter().map(|r| UnlabeledRecord { id: r.id.clone(), domain: r.domain.clone(), features: r.features.clone() }).collect();

    let mut cfg = TrainConfig {
        batch_size: 128,
        max_epochs: 15,
        learning_rate: 5e-3,
        seed: 5,
        tta_batch_size: 128,
        tta_passes: 5,
        ..TrainConfig::default()
    };
    cfg.loss_weights.lambda_ctr = 0.0;
    cfg.loss_weights.lambda_mmd = 0.0;
    let model = ModelState::new(ModelDims::compact(4), 5)?;
    let trained = fit(model, &source, &unlabeled, &cfg)?.model;

    let in_domain = evaluate(&trained, &source)?;
    let before = evaluate(&trained, &target)?;
    let (adapted, report) = tta_adapt(&trained, &all_features(&target)?, cfg.tta_batch_size, cfg.tta_passes)?;
    let after = evaluate(&adapted, &target)?;
    assert_eq!(adapted.flatten_parameters(), trained.flatten_parameters());
    assert_eq!(adapted.classifier.bn1.mode, BnMode::Eval);

    println!("\nsource accuracy:                    {:.3}", in_domain.accuracy);
    println!("shifted-domain accuracy before TTA: {:.3}", before.accuracy);
    println!("after TTA over {} batches:         {:.3}", report.batches, after.accuracy);
    println!(
        "first BN layer, running mean of unit 0: {:.3} -> {:.3}",
        trained.classifier.bn1.running_mean[0], adapted.classifier.bn1.running_mean[0]
    );
    Ok(())
}
