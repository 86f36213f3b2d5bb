//! One-dimensional sweeps over the MMD weight, the contrastive weight and the
//! test-time batch size.
//!
//! Run with `cargo run --release --example sensitivity_sweep`.

use conda_tta::data::SyntheticSpec;
use conda_tta::eval::{run_sensitivity, synthetic_benchmark, write_table, RunConfig, SensitivityGrid};
use conda_tta::model::ModelDims;

fn main() -> anyhow::Result<()> {
    let spec = SyntheticSpec { samples_per_domain: 1000, seed: 1, ..SyntheticSpec::default() };
    let (_, split) = synthetic_benchmark(&spec, 0.2)?;
    let mut cfg = RunConfig { dims: ModelDims::compact(spec.dim), ..RunConfig::default() };
    cfg.train.seed = 1;
    cfg.train.max_epochs = 8;
    // settings tuned for the synthetic benchmark
    cfg.train.learning_rate = 5e-4;
    cfg.train.augment_std = 0.5;
    let rows = run_sensitivity(&cfg, &split, &SensitivityGrid::default())?;
    write_table(&rows, std::io::stdout().lock())?;
    for param in ["lambda_mmd", "lambda_ctr", "tta_batch"] {
        let acc: Vec<f64> = rows.iter().filter(|r| r.parameter == param).map(|r| r.accuracy).collect();
        let spread = acc.iter().cloned().fold(f64::MIN, f64::max) - acc.iter().cloned().fold(f64::MAX, f64::min);
        println!("{param}: accuracy spread {:.1} points", 100.0 * spread);
    }
    Ok(())
}
