//! Analytic gradients of the full training objective against central finite
//! differences on a small network with frozen dropout masks.
//!
//! Run with `cargo run --release --example gradient_check -- [seed]`.

use conda_tta::model::{analytic_gradient, grad_check, numeric_gradient, GradCheckInput, GRAD_CHECK_FLOOR};
use conda_tta::numeric::relative_error;

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let (model, input) = GradCheckInput::toy(seed)?;
    println!("{} parameters, batch of {}", model.parameter_count(), input.batch.source.len());

    let (analytic, weights) = analytic_gradient(&model, &input)?;
    let numeric = numeric_gradient(&model, &input, &weights)?;
    println!("  idx      analytic       numeric   rel. error");
    for i in (0..analytic.len()).step_by(analytic.len() / 12 + 1) {
        let e = relative_error(analytic[i], numeric[i], GRAD_CHECK_FLOOR);
        println!("{i:>5}  {:>12.6e}  {:>12.6e}  {e:.2e}", analytic[i], numeric[i]);
    }

    let report = grad_check(&model, &input, 1e-3)?;
    println!("\n{}", serde_json::to_string_pretty(&report)?);
    anyhow::ensure!(report.passed, "gradient check failed");
    Ok(())
}
