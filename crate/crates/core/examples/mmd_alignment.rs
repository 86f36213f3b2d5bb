//! Empirical MMD between two Gaussian clouds as one of them drifts away.
//!
//! Run with `cargo run --release --example mmd_alignment`.

use conda_tta::losses::{empirical_mmd, empirical_mmd_with_grad, median_heuristic_sigma};
use conda_tta::numeric::{Matrix, SeededRng};

fn cloud(rng: &mut SeededRng, n: usize, d: usize, offset: f64) -> anyhow::Result<Matrix> {
    Ok(Matrix::new(n, d, rng.gaussian_sample(n * d, offset, 1.0)?)?)
}

fn main() -> anyhow::Result<()> {
    let mut rng = SeededRng::new(7);
    let (n, d) = (200, 8);
    let source = cloud(&mut rng, n, d, 0.0)?;

    println!("offset  sigma   mmd");
    for offset in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let target = cloud(&mut rng, n, d, offset)?;
        let sigma = median_heuristic_sigma(&source.vstack(&target)?)?;
        println!("{offset:>6.2}  {sigma:.3}  {:.4}", empirical_mmd(&source, &target, sigma)?);
    }

    // Gradient descent on the target points alone pulls them onto the source.
    let mut target = cloud(&mut rng, n, d, 1.5)?;
    let sigma = median_heuristic_sigma(&source.vstack(&target)?)?;
    println!("\ndescending on the target with sigma fixed at {sigma:.3}");
    for step in 0..=200 {
        let (value, _, d_target) = empirical_mmd_with_grad(&source, &target, sigma)?;
        if step % 40 == 0 {
            println!("step {step:>3}: mmd {value:.4}");
        }
        target = target.sub(&d_target.scale(20.0))?;
    }
    Ok(())
}
