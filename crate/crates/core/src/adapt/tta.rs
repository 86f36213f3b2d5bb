use crate::error::{data, Result};
use crate::model::{BnMode, ModelState};
use crate::numeric::Matrix;

/// Summary of one test-time adaptation run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TtaReport {
    pub batches: usize,
    pub items: usize,
}

/// Consecutive row ranges of size `batch_size`; a trailing single row is
/// folded into the previous range.
pub fn tta_chunks(n: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = (0..n).step_by(batch_size.max(1)).map(|s| s..(s + batch_size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().end = last.end;
    }
    out
}

/// Test-time adaptation: streams unlabeled target features through the model
/// with batch norm in train mode so only the running estimates move, then
/// returns the model in eval mode.
///
/// Batches are taken in input order; `passes` full passes are made.
pub fn tta_adapt(model: &ModelState, features: &Matrix, batch_size: usize, passes: usize) -> Result<(ModelState, TtaReport)> {
    if features.rows() == 0 {
        return Err(data("test-time adaptation needs target features"));
    }
    if features.rows() < 2 {
        return Err(data("test-time adaptation needs at least two target rows"));
    }
    if batch_size < 2 {
        return Err(crate::error::param("TTA batch size must be >= 2"));
    }
    let mut adapted = model.clone();
    adapted.set_bn_mode(BnMode::Train);
    let chunks = tta_chunks(features.rows(), batch_size);
    let mut report = TtaReport::default();
    for _ in 0..passes {
        for range in &chunks {
            let idx: Vec<usize> = range.clone().collect();
            let z = adapted.project(&features.select_rows(&idx))?;
            adapted.classify(&z)?;
            report.batches += 1;
            report.items += idx.len();
        }
    }
    adapted.set_bn_mode(BnMode::Eval);
    Ok((adapted, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;
    use crate::numeric::SeededRng;

    fn trained_like(seed: u64) -> ModelState {
        let mut m = ModelState::new(ModelDims::compact(4), seed).unwrap();
        let mut rng = SeededRng::new(seed);
        let z = Matrix::new(8, 4, rng.gaussian_sample(32, 0.0, 1.0).unwrap()).unwrap();
        m.classify(&z).unwrap();
        m.set_bn_mode(BnMode::Eval);
        m
    }

    #[test]
    fn chunking() {
        assert_eq!(tta_chunks(10, 4), vec![0..4, 4..8, 8..10]);
        assert_eq!(tta_chunks(9, 4), vec![0..4, 4..9]);
        assert_eq!(tta_chunks(3, 8), vec![0..3]);
    }

    #[test]
    fn parameters_are_frozen() {
        let m = trained_like(1);
        let mut rng = SeededRng::new(2);
        let x = Matrix::new(50, 4, rng.gaussian_sample(200, 1.0, 2.0).unwrap()).unwrap();
        let (a, report) = tta_adapt(&m, &x, 16, 1).unwrap();
        let bits = |m: &ModelState| m.flatten_parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&m));
        assert_ne!(a.classifier.bn1.running_mean, m.classifier.bn1.running_mean);
        assert_eq!(report, TtaReport { batches: 4, items: 50 });
        assert_eq!(a.classifier.bn1.mode, BnMode::Eval);
    }

    #[test]
    fn empty_target_is_a_data_error() {
        let m = trained_like(1);
        assert!(matches!(tta_adapt(&m, &Matrix::zeros(0, 4), 8, 1), Err(crate::Error::Data(_))));
    }
}
