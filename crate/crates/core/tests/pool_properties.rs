//! Weight, score, prior and gradient properties of the mixture posterior.

use featmix::pool::{
    combination_weights, log_prior, log_weights, pooled_log_score, weights_for_rows, CoefficientMatrix, Posterior, PriorConfig,
    SelectionMatrix, WeightVector,
};
use featmix::{standardize, DensityMatrix, FeatureMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A small random problem: `m` models, `n` features, `rows` observations.
fn instance(m: usize, n: usize, rows: usize, seed: u64) -> (DensityMatrix, FeatureMatrix, CoefficientMatrix, SelectionMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dens: Vec<Vec<f64>> = (0..rows).map(|_| (0..m).map(|_| -1.0 - normal(&mut rng).abs()).collect()).collect();
    let feats: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let beta = CoefficientMatrix::from_rows((0..m - 1).map(|_| (0..=n).map(|_| normal(&mut rng)).collect()).collect()).unwrap();
    let sel = SelectionMatrix::from_rows((0..m - 1).map(|_| (0..n).map(|_| rng.random::<bool>()).collect()).collect()).unwrap();
    let targets: Vec<usize> = (1..=rows).collect();
    (
        DensityMatrix::from_log_densities((0..m).map(|i| format!("m{i}")).collect(), targets.clone(), dens).unwrap(),
        FeatureMatrix::new((0..n).map(|j| format!("f{j}")).collect(), targets, feats).unwrap(),
        beta,
        sel,
    )
}

#[test]
fn gradient_matches_central_differences_at_100_points() {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let m = 2 + (seed % 3) as usize;
        let (dm, fm, beta, sel) = instance(m, 3, 25, seed);
        let selection = (seed % 2 == 0).then_some(&sel);
        let post = Posterior::new(&dm, &fm, PriorConfig::new(10.0).unwrap(), selection).unwrap();
        let (_, grad) = post.value_and_gradient(&beta, true).unwrap();
        let beta = beta.masked(selection);
        for i in 0..beta.n_rows() {
            for j in 0..beta.n_cols() {
                let active = featmix::pool::is_active(selection, i, j);
                if !active {
                    assert_eq!(grad.get(i, j), 0.0);
                    continue;
                }
                let h = 1e-6;
                let (mut up, mut down) = (beta.clone(), beta.clone());
                up.set(i, j, beta.get(i, j) + h);
                down.set(i, j, beta.get(i, j) - h);
                let fd = (post.value(&up).unwrap() - post.value(&down).unwrap()) / (2.0 * h);
                let a = grad.get(i, j);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
                worst = worst.max(rel);
                assert!(rel < 1e-5, "seed {seed} ({i},{j}): {a} vs {fd}");
            }
        }
    }
    println!("worst relative gradient error {worst:.2e}");
}

#[test]
fn identical_models_leave_only_the_prior_gradient() {
    let (dm, fm, beta, _) = instance(3, 2, 15, 4);
    let same: Vec<Vec<f64>> = (0..dm.n_rows()).map(|r| vec![dm.get(r, 0); 3]).collect();
    let dm = DensityMatrix::from_log_densities(dm.model_names().to_vec(), dm.targets().to_vec(), same).unwrap();
    let prior = PriorConfig::new(10.0).unwrap();
    let (_, grad) = Posterior::new(&dm, &fm, prior, None).unwrap().value_and_gradient(&beta, true).unwrap();
    for i in 0..beta.n_rows() {
        for j in 0..beta.n_cols() {
            assert!((grad.get(i, j) + beta.get(i, j) / 10.0).abs() < 1e-12);
        }
    }
}

#[test]
fn posterior_is_score_plus_prior() {
    for seed in 0..20 {
        let (dm, fm, beta, sel) = instance(4, 3, 30, seed);
        let prior = PriorConfig::new(3.0).unwrap();
        for selection in [None, Some(&sel)] {
            let value = Posterior::new(&dm, &fm, prior, selection).unwrap().value(&beta).unwrap();
            let w = weights_for_rows(&fm, &beta, selection).unwrap();
            let separate = pooled_log_score(&dm, &w).unwrap() + log_prior(&beta.masked(selection), selection, &prior);
            assert!((value - separate).abs() < 1e-12 * value.abs().max(1.0), "{value} vs {separate}");
        }
    }
}

#[test]
fn one_model_pool_scores_its_column() {
    let (dm, fm, _, _) = instance(2, 2, 12, 1);
    let single = dm.select_models(&[0]);
    let beta = CoefficientMatrix::zeros(1, 2);
    let value = Posterior::new(&single, &fm, PriorConfig::default(), None).unwrap().value(&beta).unwrap();
    assert!((value - single.column_score(0)).abs() < 1e-12);
}

#[test]
fn large_prior_variance_at_zero_approaches_equal_weight_score() {
    let (dm, fm, _, _) = instance(3, 2, 20, 2);
    let beta = CoefficientMatrix::zeros(3, 2);
    let equal = pooled_log_score(&dm, &vec![WeightVector::equal(3); 20]).unwrap();
    let value = Posterior::new(&dm, &fm, PriorConfig::new(1e6).unwrap(), None).unwrap().value(&beta).unwrap();
    let prior_term = 6.0 * (-0.5 * (2.0 * std::f64::consts::PI * 1e6).ln());
    assert!((value - equal - prior_term).abs() < 1e-9);
}

#[test]
fn intercept_only_coefficients_give_constant_weights() {
    let (_, fm, mut beta, _) = instance(4, 3, 40, 9);
    for i in 0..beta.n_rows() {
        for j in 1..beta.n_cols() {
            beta.set(i, j, 0.0);
        }
    }
    let w = weights_for_rows(&fm, &beta, None).unwrap();
    for v in &w {
        for (a, b) in v.0.iter().zip(&w[0].0) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn pooled_score_lies_between_columns_and_below_grid_maximum() {
    let (dm, _, _, _) = instance(2, 1, 30, 6);
    let grid: Vec<f64> = (0..=1000)
        .map(|k| {
            let a = k as f64 / 1000.0;
            pooled_log_score(&dm, &vec![WeightVector(vec![a, 1.0 - a]); 30]).unwrap()
        })
        .collect();
    let best = grid.iter().cloned().fold(f64::MIN, f64::max);
    let lowest_column = dm.column_score(0).min(dm.column_score(1));
    for (k, s) in grid.iter().enumerate() {
        assert!(*s >= lowest_column - 1e-9, "{k}");
        assert!(*s <= best);
    }
    assert!((grid[1000] - dm.column_score(0)).abs() < 1e-12);
    assert!((grid[0] - dm.column_score(1)).abs() < 1e-12);
}

#[test]
fn standardizing_twice_changes_nothing() {
    let (_, fm, _, _) = instance(2, 4, 50, 12);
    let (once, _) = standardize(&fm).unwrap();
    let (twice, _) = standardize(&once).unwrap();
    for (a, b) in once.rows().iter().flatten().zip(twice.rows().iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn beta_and_x(m: usize, n: usize) -> impl Strategy<Value = (CoefficientMatrix, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, n + 1), m - 1),
        prop::collection::vec(-3.0f64..3.0, n),
    )
        .prop_map(|(rows, x)| {
            let mut design = vec![1.0];
            design.extend(x);
            (CoefficientMatrix::from_rows(rows).unwrap(), design)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2500))]

    #[test]
    fn weights_lie_on_the_open_simplex((beta, x) in (2usize..=5, 0usize..4).prop_flat_map(|(m, n)| beta_and_x(m, n))) {
        let w = combination_weights(&x, &beta, None).unwrap();
        prop_assert!((w.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.0.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn shifting_a_predictor_moves_its_log_odds(
        (beta, x) in (2usize..=5, 0usize..3).prop_flat_map(|(m, n)| beta_and_x(m, n)),
        delta in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        row in 0usize..4,
    ) {
        // the reference model is pinned, so the shift shows up exactly in log(w_row / w_m)
        let row = row % beta.n_rows();
        let mut shifted = beta.clone();
        shifted.set(row, 0, beta.get(row, 0) + delta);
        let a = log_weights(&x, &beta, None).unwrap();
        let b = log_weights(&x, &shifted, None).unwrap();
        let m = a.len() - 1;
        prop_assert!(((b[row] - b[m]) - (a[row] - a[m]) - delta).abs() < 1e-9);
        // a common shift of every eta_i is not a symmetry either
        let mut all = beta.clone();
        for i in 0..beta.n_rows() {
            all.set(i, 0, beta.get(i, 0) + delta);
        }
        let c = log_weights(&x, &all, None).unwrap();
        prop_assert!(((c[0] - c[m]) - (a[0] - a[m]) - delta).abs() < 1e-9);
    }
}
