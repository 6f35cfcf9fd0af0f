//! Component models checked against independent fits and structural properties.

use featmix::models::{build_density_matrix, fit_ar, fit_garch11, fit_predict, garch_loglik, ModelKind, ModelOptions};
use featmix::{TimeSeries, Window, WindowSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Solves the normal equations by Gauss-Jordan elimination with partial pivoting.
fn least_squares_rss(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yi;
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                let pivot = a[c].clone();
                for (v, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                    *v -= f * p;
                }
            }
        }
    }
    let b: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    x.iter()
        .zip(y)
        .map(|(row, yi)| {
            let fit: f64 = row.iter().zip(&b).map(|(r, c)| r * c).sum();
            (yi - fit).powi(2)
        })
        .sum()
}

fn aic_oracle_order(y: &[f64], max_order: usize) -> usize {
    let n_eff = (y.len() - max_order) as f64;
    let aic: Vec<f64> = (0..=max_order)
        .map(|p| {
            let x: Vec<Vec<f64>> = (max_order..y.len())
                .map(|t| std::iter::once(1.0).chain((1..=p).map(|k| y[t - k])).collect())
                .collect();
            let rss = least_squares_rss(&x, &y[max_order..]);
            n_eff * (rss / n_eff).ln() + 2.0 * (p as f64 + 1.0)
        })
        .collect();
    (0..=max_order).min_by(|&a, &b| aic[a].total_cmp(&aic[b])).unwrap()
}

#[test]
fn ar_order_agrees_with_aic_oracle_on_iid_noise() {
    let mut zero = 0;
    for seed in 0..100 {
        let y = noise(100, seed);
        let got = fit_ar(&y, 5).unwrap();
        let want = aic_oracle_order(&y, 5);
        assert_eq!(got.order, want, "seed {seed}");
        zero += usize::from(got.order == 0);
    }
    // AIC's asymptotic overfitting rate puts this near 60-70%, not 95%.
    println!("AR order 0 selected on {zero}/100 iid series");
    assert!(zero >= 50, "{zero}");
}

#[test]
fn ar1_coefficient_is_recovered() {
    let z = noise(500, 3);
    let y: Vec<f64> = z.iter().scan(0.0, |s, e| {
        *s = 0.8 * *s + e;
        Some(*s)
    }).collect();
    let fit = fit_ar(&y, 5).unwrap();
    assert!(fit.order >= 1);
    assert!((0.7..=0.9).contains(&fit.phi[0]), "{:?}", fit.phi);
}

#[test]
fn garch_fit_never_worse_than_start_or_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (omega, alpha, beta) = (0.1, 0.1, 0.8);
    let mut s2: f64 = omega / (1.0 - alpha - beta);
    let mut prev: f64 = 0.0;
    let y: Vec<f64> = (0..2000)
        .map(|_| {
            s2 = omega + alpha * prev * prev + beta * s2;
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = s2.sqrt() * z;
            prev
        })
        .collect();
    let fit = fit_garch11(&y).unwrap();
    let (at_truth, _) = garch_loglik(&y, 0.0, omega, alpha, beta);
    assert!(fit.loglik >= at_truth - 1e-6, "{} < {at_truth}", fit.loglik);
    assert!(fit.loglik >= fit.start_loglik);
    for (est, truth) in [(fit.omega, omega), (fit.alpha, alpha), (fit.beta, beta)] {
        assert!((est - truth).abs() <= 0.1, "{est} vs {truth}");
    }
}

#[test]
fn garch_on_iid_noise() {
    let opts = ModelOptions::default();
    let mut flat = 0;
    for seed in 0..20 {
        let y = noise(500, seed);
        let fit = fit_garch11(&y).unwrap();
        assert!(fit.loglik >= fit.start_loglik, "seed {seed}");
        let Ok(f) = fit_predict(ModelKind::Garch11, &y, 30, &opts) else {
            continue;
        };
        let sds: Vec<f64> = f.densities.iter().map(|d| d.sd).collect();
        let span = sds.iter().cloned().fold(f64::MIN, f64::max) - sds.iter().cloned().fold(f64::MAX, f64::min);
        // the variance recursion moves sd_1 toward the unconditional level, never past it
        let uncond = (fit.omega / (1.0 - fit.alpha - fit.beta)).sqrt();
        for w in sds.windows(2) {
            assert!((w[1] - uncond).abs() <= (w[0] - uncond).abs() + 1e-12, "seed {seed}");
        }
        // with no ARCH term the in-sample variance path has settled at the fixed point
        if fit.alpha < 1e-8 && fit.beta.powi(500) < 1e-9 {
            assert!(span < 1e-6, "seed {seed}: span {span}");
        }
        flat += usize::from(span < 1e-6);
    }
    println!("GARCH sd flat within 1e-6 on {flat}/20 iid series");
}

#[test]
fn every_model_is_a_proper_gaussian_at_the_mean() {
    let y: Vec<f64> = noise(80, 9).iter().enumerate().map(|(t, e)| 0.1 * t as f64 + e).collect();
    let opts = ModelOptions::default();
    for kind in ModelKind::ALL {
        let f = fit_predict(kind, &y, 6, &opts).unwrap();
        for d in &f.densities {
            assert!(d.sd >= opts.sd_floor);
            let want = -(d.sd * (2.0 * std::f64::consts::PI).sqrt()).ln();
            assert!((d.log_density(d.mean) - want).abs() < 1e-12, "{kind}");
        }
        if matches!(kind, ModelKind::Naive | ModelKind::RwDrift) {
            assert!(f.densities.windows(2).all(|w| w[1].sd >= w[0].sd), "{kind}");
        }
    }
}

#[test]
fn density_matrix_is_reproducible_and_sums_to_log_scores() {
    let y: Vec<f64> = noise(90, 4).iter().scan(10.0, |s, e| {
        *s += 0.3 * e;
        Some(*s)
    }).collect();
    let series = TimeSeries::from_values("x", y.clone()).unwrap();
    let spec = WindowSpec::new(60, Window::All, Window::All).unwrap();
    let opts = ModelOptions::default();
    let a = build_density_matrix(&series, &ModelKind::ALL, &spec, &opts).unwrap();
    let b = build_density_matrix(&series, &ModelKind::ALL, &spec, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.n_rows(), a.n_models()), (30, ModelKind::ALL.len()));
    for (i, kind) in ModelKind::ALL.iter().enumerate() {
        let direct: f64 = (61..=90)
            .map(|t| fit_predict(*kind, &y[..t - 1], 1, &opts).unwrap().densities[0].log_density(y[t - 1]))
            .sum();
        assert!((a.column_score(i) - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn poisoning_a_value_only_changes_later_rows(seed in 0u64..1000, at in 13usize..=24, bump in 1.0f64..100.0) {
        let y = noise(24, seed);
        let mut poisoned = y.clone();
        poisoned[at - 1] += bump;
        let spec = WindowSpec::new(12, Window::All, Window::All).unwrap();
        let pool = [ModelKind::Naive, ModelKind::RwDrift, ModelKind::EtsAan, ModelKind::Ar];
        let opts = ModelOptions { ar_max_order: 2, ..ModelOptions::default() };
        let a = build_density_matrix(&TimeSeries::from_values("a", y).unwrap(), &pool, &spec, &opts).unwrap();
        let b = build_density_matrix(&TimeSeries::from_values("b", poisoned).unwrap(), &pool, &spec, &opts).unwrap();
        for r in 0..a.n_rows() {
            let t = a.targets()[r];
            if t < at {
                prop_assert_eq!(a.row(r), b.row(r));
            }
        }
        let hit = a.targets().iter().position(|&t| t == at).unwrap();
        prop_assert_ne!(a.row(hit), b.row(hit));
    }
}
