use conda_tta::eval::{feature_variance, project_2d, read_table, write_table, Confusion, SweepRow};
use conda_tta::losses::{contrastive_loss, empirical_mmd, gram_matrix, PairedBatch};
use conda_tta::model::{argmax_labels, BatchNormState};
use conda_tta::numeric::{squared_distance, Matrix, SeededRng};
use proptest::prelude::*;

mod common;
use common::min_eigenvalue;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0f64..5.0, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn random_rotation(d: usize, rng: &mut SeededRng) -> Matrix {
    // Product of Givens rotations over every coordinate pair.
    let mut q = Matrix::identity(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let theta = rng.uniform(0.0, std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            let mut g = Matrix::identity(d);
            g.set(i, i, c);
            g.set(j, j, c);
            g.set(i, j, -s);
            g.set(j, i, s);
            q = q.matmul(&g).unwrap();
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mmd_is_symmetric_and_non_negative(a in matrix(5, 3), b in matrix(4, 3), sigma in 0.1f64..5.0) {
        let ab = empirical_mmd(&a, &b, sigma).unwrap();
        let ba = empirical_mmd(&b, &a, sigma).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(empirical_mmd(&a, &a, sigma).unwrap(), 0.0);
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite(z in matrix(6, 3), sigma in 0.2f64..4.0, v in prop::collection::vec(-1.0f64..1.0, 6)) {
        let k = gram_matrix(&z, sigma).unwrap();
        let mut q = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                q += v[i] * k.get(i, j) * v[j];
            }
        }
        prop_assert!(q >= -1e-10);
    }

    #[test]
    fn contrastive_loss_ignores_row_scaling(
        a in matrix(3, 4),
        b in matrix(3, 4),
        scales in prop::collection::vec(0.5f64..20.0, 6),
    ) {
        prop_assume!(a.iter_rows().chain(b.iter_rows()).all(|r| r.iter().map(|v| v * v).sum::<f64>() > 1e-2));
        let base = contrastive_loss(&PairedBatch::new(a.clone(), b.clone()).unwrap(), 0.5, false).unwrap();
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        for r in 0..3 {
            a2.row_mut(r).iter_mut().for_each(|v| *v *= scales[r]);
            b2.row_mut(r).iter_mut().for_each(|v| *v *= scales[r + 3]);
        }
        let scaled = contrastive_loss(&PairedBatch::new(a2, b2).unwrap(), 0.5, false).unwrap();
        prop_assert!((base - scaled).abs() < 1e-8, "{} vs {}", base, scaled);
    }

    #[test]
    fn metrics_match_brute_force(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60)) {
        let (pred, truth): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let c = Confusion::from_predictions(&pred, &truth).unwrap();
        let count = |p: u8, t: u8| pred.iter().zip(&truth).filter(|&(&a, &b)| a == p && b == t).count();
        let (tp, fp, tn, fn_) = (count(1, 1), count(1, 0), count(0, 0), count(0, 1));
        prop_assert_eq!(c, Confusion { tp, fp, tn, fn_ });
        prop_assert_eq!(c.total(), pred.len());
        prop_assert!((c.accuracy() - (tp + tn) as f64 / pred.len() as f64).abs() < 1e-15);
        if tp + fp + fn_ > 0 {
            prop_assert!((c.f1() - 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn predictions_survive_increasing_transforms(p in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let probs = Matrix::new(p.len(), 2, p.iter().flat_map(|&v| [1.0 - v, v]).collect()).unwrap();
        let base = argmax_labels(&probs);
        for f in [|v: f64| v.ln_1p(), |v: f64| 3.0 * v - 7.0, |v: f64| v.powi(3)] {
            prop_assert_eq!(&argmax_labels(&probs.map(f)), &base);
        }
    }

    #[test]
    fn batchnorm_output_has_affine_moments(x in matrix(12, 3), gamma in prop::collection::vec(0.5f64..2.0, 3), beta in prop::collection::vec(-1.0f64..1.0, 3)) {
        let (_, var) = BatchNormState::batch_statistics(&x);
        prop_assume!(var.iter().all(|&v| v > 0.1));
        let mut bn = BatchNormState::new(3);
        bn.gamma = gamma.clone();
        bn.beta = beta.clone();
        let (y, cache) = bn.forward_train(&x).unwrap();
        let (mean_y, var_y) = BatchNormState::batch_statistics(&y);
        for f in 0..3 {
            prop_assert!((mean_y[f] - beta[f]).abs() < 1e-9);
            let expected = gamma[f] * gamma[f] * cache.batch_var[f] / (cache.batch_var[f] + bn.epsilon);
            prop_assert!((var_y[f] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_csv_round_trips(rows in prop::collection::vec(("[a-z_]{1,10}", any::<f64>(), 0.0f64..=1.0, 0.0f64..=1.0), 0..12)) {
        let rows: Vec<SweepRow> = rows
            .into_iter()
            .filter(|r| r.1.is_finite())
            .map(|(parameter, value, accuracy, f1)| SweepRow { parameter, value, accuracy, f1 })
            .collect();
        let mut buf = Vec::new();
        write_table(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_table::<SweepRow>(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn feature_variance_is_in_unit_range(x in matrix(10, 4)) {
        let v = feature_variance(&x).unwrap();
        prop_assert!((0.0..=0.25 + 1e-12).contains(&v));
    }
}

#[test]
fn rotation_preserves_projected_distances() {
    let mut rng = SeededRng::new(21);
    let (n, d) = (40, 6);
    // Anisotropic cloud so the top two components are well separated.
    let mut x = Matrix::new(n, d, rng.gaussian_sample(n * d, 0.0, 1.0).unwrap()).unwrap();
    for r in 0..n {
        for (c, v) in x.row_mut(r).iter_mut().enumerate() {
            *v *= [5.0, 3.0, 1.0, 0.5, 0.3, 0.2][c];
        }
    }
    let q = random_rotation(d, &mut rng);
    let rotated = x.matmul(&q).unwrap();
    let (p, pr) = (project_2d(&x).unwrap(), project_2d(&rotated).unwrap());
    for i in 0..n {
        for j in 0..n {
            let a = squared_distance(p.row(i), p.row(j)).sqrt();
            let b = squared_distance(pr.row(i), pr.row(j)).sqrt();
            assert!((a - b).abs() < 1e-8, "pair ({i},{j}): {a} vs {b}");
        }
    }
}

#[test]
fn gram_matrices_of_random_batches_have_no_negative_eigenvalues() {
    let mut rng = SeededRng::new(8);
    for _ in 0..20 {
        let z = Matrix::new(8, 5, rng.gaussian_sample(40, 0.0, 1.0).unwrap()).unwrap();
        let k = gram_matrix(&z, rng.uniform(1.0, 2.0)).unwrap();
        assert!(min_eigenvalue(&k) >= -1e-10);
    }
}
