//! The full model against variants without the contrastive term, without the
//! MMD term and without test-time adaptation, averaged over seeds.
//!
//! Run with `cargo run --release --example ablation_study -- [n_seeds]`.

use std::collections::BTreeMap;

use conda_tta::data::SyntheticSpec;
use conda_tta::eval::{run_ablation, synthetic_benchmark, write_table, AblationVariant, RunConfig};
use conda_tta::model::ModelDims;

fn main() -> anyhow::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let mut sums: BTreeMap<AblationVariant, (f64, f64)> = BTreeMap::new();
    for seed in 0..n_seeds {
        let spec = SyntheticSpec { samples_per_domain: 1000, seed, ..SyntheticSpec::default() };
        let (_, split) = synthetic_benchmark(&spec, 0.2)?;
        let mut cfg = RunConfig { dims: ModelDims::compact(spec.dim), ..RunConfig::default() };
        cfg.train.seed = seed;
        cfg.train.max_epochs = 10;
        // settings tuned for the synthetic benchmark
        cfg.train.learning_rate = 5e-4;
        cfg.train.augment_std = 0.5;
        let rows = run_ablation(&cfg, &split)?;
        println!("seed {seed}");
        write_table(&rows, std::io::stdout().lock())?;
        for r in rows {
            let e = sums.entry(r.variant).or_default();
            e.0 += r.f1;
            e.1 += r.accuracy;
        }
    }
    println!("\nmean over {n_seeds} seeds      F1     Acc");
    for (v, (f1, acc)) in sums {
        println!("{:>20}  {:.3}  {:.3}", format!("{v:?}"), f1 / n_seeds as f64, acc / n_seeds as f64);
    }
    Ok(())
}
