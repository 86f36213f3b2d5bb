//! NT-Xent loss on anchor/augment pairs: how it reacts to augmentation
//! strength and temperature, and its behaviour on degenerate batches.
//!
//! Run with `cargo run --release --example contrastive_loss`.

use conda_tta::adapt::augment_matrix;
use conda_tta::losses::{contrastive_loss, PairedBatch};
use conda_tta::numeric::{Matrix, SeededRng};

fn main() -> anyhow::Result<()> {
    let mut rng = SeededRng::new(11);
    let (b, d) = (64, 16);
    let anchors = Matrix::new(b, d, rng.gaussian_sample(b * d, 0.0, 1.0)?)?;

    println!("augment std  t=0.1     t=0.5     t=1.0");
    for std in [0.0, 0.05, 0.2, 0.5, 1.0, 3.0] {
        let augments = augment_matrix(&anchors, std, &mut rng)?;
        let batch = PairedBatch::new(anchors.clone(), augments)?;
        let row: Vec<String> = [0.1, 0.5, 1.0]
            .iter()
            .map(|&t| contrastive_loss(&batch, t, false).map(|l| format!("{l:8.3}")))
            .collect::<Result<_, _>>()?;
        println!("{std:>11.2}  {}", row.join("  "));
    }

    let shuffled = anchors.select_rows(&rng.permutation(b));
    let mismatched = PairedBatch::new(anchors.clone(), shuffled)?;
    println!("\nmismatched pairs, t=0.5: {:.3}", contrastive_loss(&mismatched, 0.5, false)?);
    println!("same pairs, symmetrized: {:.3}", contrastive_loss(&mismatched, 0.5, true)?);

    let one = PairedBatch::new(anchors.select_rows(&[0]), anchors.select_rows(&[0]))?;
    println!("single pair: {}", contrastive_loss(&one, 0.5, false)?);
    Ok(())
}
