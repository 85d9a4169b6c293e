use gridres::select::{
    cv_select, lasso_fit, lasso_path, ols_refit_filter, select_predictors, standardize,
    write_selection_summary, CvConfig, DesignMatrix, LambdaRule,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_design(
    seed: u64,
    n: usize,
    m: usize,
    beta: &[(usize, f64)],
    noise: f64,
) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| z.sample(&mut rng)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            0.5 + beta.iter().map(|&(j, b)| b * columns[j][i]).sum::<f64>()
                + noise * z.sample(&mut rng)
        })
        .collect();
    DesignMatrix::new((0..m).map(|j| format!("v{j:02}")).collect(), columns, y).unwrap()
}

fn ols_reference(x: &DesignMatrix) -> Vec<f64> {
    let n = x.n_rows();
    let m = x.n_predictors();
    let a = DMatrix::from_fn(
        n,
        m + 1,
        |i, j| if j == 0 { 1.0 } else { x.columns[j - 1][i] },
    );
    let y = DVector::from_vec(x.response.clone());
    let beta = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * y;
    beta.iter().copied().collect()
}

#[test]
fn zero_penalty_is_ols() {
    let x = gaussian_design(11, 60, 6, &[(0, 1.0), (3, -2.0)], 0.5);
    let s = standardize(&x).unwrap();
    let fit = lasso_fit(&s, 0.0).unwrap();
    assert!(fit.converged);
    let ols = ols_reference(&x);
    assert!((fit.intercept - ols[0]).abs() < 1e-6);
    for j in 0..6 {
        assert!((fit.coefficients[j] - ols[j + 1]).abs() < 1e-6, "j={j}");
    }
}

#[test]
fn l1_norm_shrinks_along_grid() {
    let x = gaussian_design(12, 80, 10, &[(1, 1.0), (2, 0.4), (7, -0.7)], 1.0);
    let s = standardize(&x).unwrap();
    let lambdas = gridres::select::lambda_grid(0.8, 40, 1e-3);
    let path = lasso_path(&s, &lambdas).unwrap();
    for w in path.windows(2) {
        assert!(w[0].l1_norm() <= w[1].l1_norm() + 1e-9);
    }
}

#[test]
fn back_transform_preserves_predictions() {
    let mut x = gaussian_design(13, 40, 5, &[(0, 3.0), (4, 1.0)], 0.3);
    for v in &mut x.columns[2] {
        *v = *v * 250.0 + 1000.0;
    }
    let s = standardize(&x).unwrap();
    let fit = lasso_fit(&s, 0.05).unwrap();
    for i in 0..x.n_rows() {
        let std_pred = s.response_mean
            + fit
                .standardized
                .iter()
                .zip(&s.columns)
                .map(|(b, c)| b * c[i])
                .sum::<f64>();
        let orig = fit.predict(&x.row(i));
        assert!((std_pred - orig).abs() < 1e-10, "row {i}");
    }
}

#[test]
fn leave_one_out_cv_matches_explicit_refits() {
    let x = gaussian_design(14, 12, 4, &[(0, 1.5), (2, -1.0)], 0.4);
    let cfg = CvConfig {
        k: 12,
        seed: 3,
        n_lambda: 15,
        lambda_min_ratio: 1e-2,
        ..CvConfig::default()
    };
    let curve = cv_select(&x, &cfg).unwrap();
    for (l, &lambda) in curve.lambdas.iter().enumerate() {
        let mut sq = 0.0;
        for i in 0..12 {
            let rest: Vec<usize> = (0..12).filter(|&k| k != i).collect();
            let s = standardize(&x.subset(&rest)).unwrap();
            let fit = lasso_fit(&s, lambda).unwrap();
            sq += (x.response[i] - fit.predict(&x.row(i))).powi(2);
        }
        let want = sq / 12.0;
        assert!(
            (curve.mean_error[l] - want).abs() < 1e-6 * want.max(1.0),
            "lambda {lambda}: {} vs {want}",
            curve.mean_error[l]
        );
    }
}

#[test]
fn same_seed_same_everything() {
    let x = gaussian_design(15, 50, 12, &[(3, 2.0), (8, -1.0)], 1.0);
    let cfg = CvConfig {
        seed: 99,
        ..CvConfig::default()
    };
    let a = select_predictors(&x, &cfg, 0.10).unwrap();
    let b = select_predictors(&x, &cfg, 0.10).unwrap();
    assert_eq!(a.curve, b.curve);
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    write_selection_summary(&mut ba, &a.summary).unwrap();
    write_selection_summary(&mut bb, &b.summary).unwrap();
    assert_eq!(ba, bb);
}

#[test]
fn one_se_rule_picks_larger_penalty() {
    let x = gaussian_design(16, 60, 8, &[(0, 1.0), (5, 0.5)], 1.0);
    let min = cv_select(&x, &CvConfig::default()).unwrap();
    let one_se = cv_select(
        &x,
        &CvConfig {
            rule: LambdaRule::OneSe,
            ..CvConfig::default()
        },
    )
    .unwrap();
    assert!(one_se.chosen_lambda() >= min.chosen_lambda());
    assert_eq!(min.mean_error, one_se.mean_error);
}

#[test]
fn linear_signal_is_selected() {
    let x = gaussian_design(17, 60, 8, &[(6, 2.0)], 0.0);
    let run = select_predictors(&x, &CvConfig::default(), 0.10).unwrap();
    assert!(run.lasso.active.contains(&6));
    assert!(run.summary.kept.contains(&"v06".to_string()));
}

/// Signal at five noise standard deviations next to an irrelevant column;
/// the filter statistics are compared with a normal-equation reference.
#[test]
fn noise_dropped_signal_kept() {
    let x = gaussian_design(18, 200, 2, &[(0, 5.0)], 1.0);
    let s = ols_refit_filter(&x, &[0, 1], 0.10).unwrap();
    assert_eq!(s.kept, vec!["v00"]);
    assert_eq!(s.rows.len(), 1);
    assert!((s.rows[0].coefficient - 5.0).abs() < 0.3);

    let a = DMatrix::from_fn(
        200,
        3,
        |i, j| if j == 0 { 1.0 } else { x.columns[j - 1][i] },
    );
    let y = DVector::from_vec(x.response.clone());
    let inv = (a.transpose() * &a).try_inverse().unwrap();
    let beta = &inv * a.transpose() * &y;
    let r = &y - &a * &beta;
    let s2 = r.norm_squared() / 197.0;
    for k in 0..2 {
        let t = beta[k + 1] / (s2 * inv[(k + 1, k + 1)]).sqrt();
        assert!((s.first_pass[k].t_value - t).abs() < 1e-8 * t.abs().max(1.0));
    }
    assert!(s.first_pass[1].p_value >= 0.10);
}

#[test]
fn reported_p_values_are_probabilities() {
    for seed in 0..10 {
        let x = gaussian_design(100 + seed, 45, 15, &[(0, 1.0), (1, -1.0), (2, 0.5)], 1.0);
        let run = select_predictors(
            &x,
            &CvConfig {
                seed,
                ..CvConfig::default()
            },
            0.10,
        )
        .unwrap();
        let s = &run.summary;
        for r in s.first_pass.iter().chain(&s.rows).chain([&s.intercept]) {
            assert!((0.0..=1.0).contains(&r.p_value), "{r:?}");
        }
        assert!(s.kept.iter().all(|k| s.lasso_active.contains(k)));
    }
}

#[test]
fn sparse_truth_recovered() {
    let truth = [(4usize, 1.0), (17, -0.8), (33, 0.6)];
    let mut hits = 0;
    for trial in 0..20u64 {
        let x = gaussian_design(5000 + trial, 200, 41, &truth, 1.0);
        let curve = cv_select(
            &x,
            &CvConfig {
                seed: trial,
                ..CvConfig::default()
            },
        )
        .unwrap();
        let s = standardize(&x).unwrap();
        let fit = lasso_path(&s, &curve.lambdas[..=curve.chosen])
            .unwrap()
            .pop()
            .unwrap();
        if truth.iter().all(|(j, _)| fit.active.contains(j)) {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20");
}
