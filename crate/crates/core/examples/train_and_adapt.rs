//! End to end on the synthetic benchmark: train with the contrastive and MMD
//! terms, adapt batch norm on the target, and compare against training on
//! the source alone and against an in-domain reference.
//!
//! Run with `cargo run --release --example train_and_adapt -- [seed]`.

use conda_tta::data::SyntheticSpec;
use conda_tta::eval::{run_pipeline, source_only, synthetic_benchmark, target_train_labels, upper_bound, RunConfig};
use conda_tta::model::{Checkpoint, ModelDims};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let spec = SyntheticSpec { samples_per_domain: 1000, seed, ..SyntheticSpec::default() };
    let (records, split) = synthetic_benchmark(&spec, 0.2)?;
    println!(
        "source {} / target train {} / target test {}",
        split.source.len(),
        split.target_train.len(),
        split.target_test.len()
    );

    let mut cfg = RunConfig { dims: ModelDims::compact(spec.dim), ..RunConfig::default() };
    cfg.train.seed = seed;
    cfg.train.max_epochs = 10;
    // settings tuned for the synthetic benchmark
    cfg.train.learning_rate = 5e-4;
    cfg.train.augment_std = 0.5;

    let full = run_pipeline(&cfg, &split)?;
    println!("\nepoch   total  ce_src  ctr_src  ctr_tgt     mmd  val_ce");
    for e in &full.trace.epochs {
        println!(
            "{:>5}  {:>6.3}  {:>6.3}  {:>7.3}  {:>7.3}  {:>6.3}  {:>6.3}",
            e.epoch, e.total, e.ce_source, e.ctr_source, e.ctr_target, e.mmd, e.val_ce
        );
    }
    println!("best epoch {:?}", full.trace.best_epoch);

    let base = source_only(&cfg, &split)?;
    let reference = upper_bound(&cfg, &split, &target_train_labels(&records, &split)?)?;
    println!("\ntarget accuracy / F1");
    for (name, run) in [("source only", &base), ("adapted", &full), ("in-domain reference", &reference)] {
        println!("{name:>20}: {:.3} / {:.3}", run.report.accuracy, run.report.f1);
    }

    let path = std::env::temp_dir().join(format!("conda-tta-example-{seed}.json"));
    Checkpoint::new(full.model).with_metadata("config_hash", cfg.hash()).save(&path)?;
    println!("\ncheckpoint written to {}", path.display());
    Ok(())
}
