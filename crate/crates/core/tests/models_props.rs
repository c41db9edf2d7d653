use ndarray::{Array1, Array2};
use nercc_core::models::{Affine, RbfMixture};
use nercc_core::{estimate_grad_infnorm, load_model, save_model, ComputeModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn softmax_rows_are_distributions(seed in any::<u64>(), d in 1usize..10, m in 2usize..8, scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ComputeModel::random_affine_softmax(d, m, scale, &mut rng);
        let x = Array2::from_shape_fn((7, d), |_| rng.random_range(-5.0..5.0));
        let y = model.apply(x.view()).unwrap();
        for row in y.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
    }
}

/// Full central-difference Jacobian, `m x d`.
fn fd_jacobian(model: &ComputeModel, x: &Array1<f64>, h: f64) -> Array2<f64> {
    let d = x.len();
    let m = model.output_dim();
    let mut jac = Array2::zeros((m, d));
    for j in 0..d {
        let mut up = x.clone();
        up[j] += h;
        let mut down = x.clone();
        down[j] -= h;
        let diff = (model.apply_row(up.view()).unwrap() - model.apply_row(down.view()).unwrap()) / (2.0 * h);
        jac.column_mut(j).assign(&diff);
    }
    jac
}

/// `d/dx_j sum_c A[c,i] exp(-||x-mu_c||^2/s^2) = sum_c A[c,i] e_c * (-2 (x_j - mu_cj) / s^2)`.
fn rbf_jacobian(r: &RbfMixture, x: &Array1<f64>) -> Array2<f64> {
    let (centers, m) = (r.centers.nrows(), r.amplitudes.ncols());
    let s2 = r.sigma * r.sigma;
    let mut jac = Array2::zeros((m, x.len()));
    for c in 0..centers {
        let diff = x - &r.centers.row(c);
        let e = (-diff.dot(&diff) / s2).exp();
        for i in 0..m {
            for j in 0..x.len() {
                jac[[i, j]] += r.amplitudes[[c, i]] * e * (-2.0 * diff[j] / s2);
            }
        }
    }
    jac
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn finite_differences_match_analytic_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (d, m) = (rng.random_range(1..7), rng.random_range(1..5));
        let x = Array1::from_shape_fn(d, |_| rng.random_range(-1.5..1.5));

        let lin = ComputeModel::random_linear(d, m, 2.0, &mut rng);
        let ComputeModel::Linear(Affine { weight, .. }) = &lin else {
            unreachable!()
        };
        assert!(max_abs_diff(&fd_jacobian(&lin, &x, 1e-5), weight) <= 1e-4);

        let sigma = rng.random_range(0.5..3.0);
        let rbf = ComputeModel::random_rbf(d, m, 4, sigma, &mut rng).unwrap();
        let ComputeModel::RbfMixture(params) = &rbf else {
            unreachable!()
        };
        assert!(max_abs_diff(&fd_jacobian(&rbf, &x, 1e-5), &rbf_jacobian(params, &x)) <= 1e-4);

        let want = rbf_jacobian(params, &x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let got = estimate_grad_infnorm(&rbf, x.view().insert_axis(ndarray::Axis(0)), 1e-5).unwrap();
        assert!((got - want).abs() <= 1e-4);
    }
}

#[test]
fn saved_affine_softmax_agrees_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = ComputeModel::random_affine_softmax(6, 4, 1.5, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_model(&model, dir.path(), "clf").unwrap();
    let loaded = load_model(&manifest).unwrap();
    assert_eq!(loaded, model);
    let x = Array2::from_shape_fn((10, 6), |_| rng.random_range(-3.0..3.0));
    let (a, b) = (model.apply(x.view()).unwrap(), loaded.apply(x.view()).unwrap());
    assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn apply_does_not_depend_on_scheduling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = ComputeModel::random_mlp(5, &[16, 8], 3, Default::default(), &mut rng).unwrap();
    let x = Array2::from_shape_fn((64, 5), |_| rng.random_range(-2.0..2.0));
    let serial = model.apply(x.view()).unwrap();
    let rows: Vec<Array1<f64>> = (0..64)
        .into_par_iter()
        .rev()
        .map(|i| model.apply_row(x.row(i)).unwrap())
        .collect();
    for (i, row) in rows.iter().rev().enumerate() {
        assert!(row
            .iter()
            .zip(serial.row(i).iter())
            .all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
