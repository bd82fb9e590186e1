use eda_sleep::predictors::{
    auc, cross_validate, logistic_fit, naive_bayes_fit, ols_fit, CvOptions, Features, LogisticOptions, ModelKind,
};
use eda_sleep::Exec;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn features(cols: Vec<Vec<f64>>) -> Features {
    let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
    Features::new(names, cols).unwrap()
}

/// `n` rows of `p` predictors plus a response built from them.
fn design(p: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (12usize..40).prop_flat_map(move |n| {
        (prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), p), prop::collection::vec(-1.0..1.0f64, n))
            .prop_map(|(cols, noise)| {
                let y = (0..noise.len())
                    .map(|i| noise[i] + cols.iter().enumerate().map(|(j, c)| (j as f64 + 0.5) * c[i]).sum::<f64>())
                    .collect();
                (cols, y)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_ignores_monotone_transforms(pairs in prop::collection::vec((-5.0..5.0f64, any::<bool>()), 4..60)) {
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = pairs.iter().map(|p| (p.0 * 4.0).round() / 4.0).collect();
        let warped: Vec<f64> = scores.iter().map(|s| s.powi(3) + (0.5 * s).exp()).collect();
        prop_assert!((auc(&scores, &labels).unwrap() - auc(&warped, &labels).unwrap()).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&scores, &labels).unwrap() + auc(&flipped, &labels).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_residuals_are_orthogonal((cols, y) in design(3)) {
        let fit = ols_fit(&y, &features(cols.clone())).unwrap();
        let pred = fit.predict(&features(cols.clone())).unwrap();
        let e: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let scale = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(e.iter().sum::<f64>().abs() < 1e-9 * scale);
        for c in &cols {
            prop_assert!(c.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-9 * scale * 3.0);
        }
    }

    #[test]
    fn naive_bayes_ignores_affine_rescaling(
        (cols, y) in design(2),
        a in prop_oneof![0.5..4.0f64, -4.0..-0.5f64],
        b in -10.0..10.0f64,
    ) {
        let labels: Vec<bool> = y.iter().map(|v| *v > 0.0).collect();
        prop_assume!(labels.iter().filter(|&&l| l).count() >= 3 && labels.iter().filter(|&&l| !l).count() >= 3);
        let x = features(cols.clone());
        let base = naive_bayes_fit(&labels, &x).unwrap();
        prop_assume!(!base.any_floored());
        let moved = features(vec![cols[0].iter().map(|v| a * v + b).collect(), cols[1].clone()]);
        let fit = naive_bayes_fit(&labels, &moved).unwrap();
        prop_assume!(!fit.any_floored());
        let p0 = base.predict_proba(&x).unwrap();
        let p1 = fit.predict_proba(&moved).unwrap();
        for (u, v) in p0.iter().zip(&p1) {
            prop_assert!((u - v).abs() < 1e-9, "{} vs {}", u, v);
            if (u - 0.5).abs() > 1e-9 {
                prop_assert_eq!(*u > 0.5, *v > 0.5);
            }
        }
    }

    #[test]
    fn irls_log_likelihood_never_decreases((cols, y) in design(2), ridge in prop_oneof![Just(0.0), 0.0..1.0f64]) {
        let labels: Vec<bool> = y.iter().enumerate().map(|(i, v)| (*v + if i % 3 == 0 { 2.0 } else { 0.0 }) > 0.5).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        if let Ok(fit) = logistic_fit(&labels, &features(cols), &LogisticOptions { ridge, ..Default::default() }) {
            for w in fit.log_likelihood_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12, "{:?}", fit.log_likelihood_trace);
            }
        }
    }
}

/// Leave-one-out OLS predictions from the hat matrix: the held-out residual
/// is `e_i / (1 - h_ii)`.
#[test]
fn leave_one_out_matches_hat_matrix() {
    let n = 23;
    let x1: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64).sin() * 2.0).collect();
    let x2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.8 * x1[i] - 1.3 * x2[i] + ((i * 13 % 5) as f64 - 2.0) * 0.3).collect();
    let cv = cross_validate(
        ModelKind::Ols,
        &y,
        &features(vec![x1.clone(), x2.clone()]),
        &CvOptions { k: n, seed: 5, ..Default::default() },
        Exec::Sequential,
    )
    .unwrap();

    let xm = DMatrix::from_fn(n, 3, |i, j| [1.0, x1[i], x2[i]][j]);
    let yv = DVector::from_vec(y.clone());
    let xtx_inv = (xm.transpose() * &xm).try_inverse().unwrap();
    let hat = &xm * &xtx_inv * xm.transpose();
    let resid = &yv - &hat * &yv;
    for i in 0..n {
        let loo_pred = y[i] - resid[i] / (1.0 - hat[(i, i)]);
        assert!((cv.predictions[i] - loo_pred).abs() < 1e-10, "row {i}: {} vs {loo_pred}", cv.predictions[i]);
    }
}
