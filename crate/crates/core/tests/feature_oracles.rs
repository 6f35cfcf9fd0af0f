//! Feature values against hand computations and brute-force reimplementations.

use featmix::features::{compute_features, Feature, FeatureCatalog};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn feature(f: Feature, y: &[f64]) -> f64 {
    compute_features(y, &FeatureCatalog::new(vec![f]).unwrap()).unwrap().values[0]
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Entropy from an O(n^2) DFT: normalized Shannon entropy of |X_k|^2, k = 1..=n/2.
fn entropy_oracle(y: &[f64]) -> f64 {
    let n = y.len();
    let power: Vec<f64> = (1..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in y.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re * re + im * im
        })
        .collect();
    let total: f64 = power.iter().sum();
    let h: f64 = power
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    h / (power.len() as f64).ln()
}

/// KPSS level statistic with explicit double loops.
fn kpss_oracle(y: &[f64]) -> f64 {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    for t in 0..n {
        let mut s = 0.0;
        for v in &y[..=t] {
            s += v - mean;
        }
        num += s * s;
    }
    let lags = (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let mut lrv = 0.0;
    for l in 0..=lags {
        let mut g = 0.0;
        for t in l..n {
            g += (y[t] - mean) * (y[t - l] - mean);
        }
        g /= n as f64;
        let w = if l == 0 { 1.0 } else { 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) };
        lrv += w * g;
    }
    num / (n as f64 * n as f64) / lrv
}

#[test]
fn exact_small_examples() {
    assert_eq!(feature(Feature::XAcf1, &[1.0, 2.0, 3.0, 4.0]), 0.25);
    assert_eq!(feature(Feature::XAcf1, &[1.0, -1.0, 1.0, -1.0]), -0.75);
    assert_eq!(feature(Feature::CrossingPoints, &[0.0, 2.0, 0.0, 2.0]), 3.0);
}

#[test]
fn kpss_matches_direct_formula() {
    let y = noise(200, 7);
    let got = feature(Feature::UnitrootKpss, &y);
    let want = kpss_oracle(&y);
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    let walk: Vec<f64> = y.iter().scan(0.0, |s, v| {
        *s += v;
        Some(*s)
    }).collect();
    assert!((feature(Feature::UnitrootKpss, &walk) - kpss_oracle(&walk)).abs() < 1e-8);
    assert!(feature(Feature::UnitrootKpss, &walk) > feature(Feature::UnitrootKpss, &y));
}

#[test]
fn entropy_matches_brute_force_dft() {
    for (n, seed) in [(200, 7), (97, 2), (64, 5)] {
        let y = noise(n, seed);
        let got = feature(Feature::Entropy, &y);
        assert!((got - entropy_oracle(&y)).abs() < 1e-8);
    }
    let sine: Vec<f64> = (0..200).map(|t| (2.0 * std::f64::consts::PI * 10.0 * t as f64 / 200.0).sin()).collect();
    let e_sine = feature(Feature::Entropy, &sine);
    assert!((e_sine - entropy_oracle(&sine)).abs() < 1e-8);
    assert!(e_sine < 0.35, "{e_sine}");
    assert!(feature(Feature::Entropy, &noise(200, 7)) > 0.85);
}

#[test]
fn trend_separates_lines_from_noise() {
    let line: Vec<f64> = (0..60).map(|t| 3.0 + 0.5 * t as f64).collect();
    assert!((feature(Feature::Trend, &line) - 1.0).abs() < 1e-9);
    assert!(feature(Feature::Trend, &noise(200, 3)) < 0.1);
}

#[test]
fn arch_statistics_detect_volatility_clustering() {
    let calm = noise(400, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s2: f64 = 1.0;
    let mut prev: f64 = 0.0;
    let clustered: Vec<f64> = (0..400)
        .map(|_| {
            s2 = 0.1 + 0.5 * prev * prev + 0.45 * s2;
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = s2.sqrt() * z;
            prev
        })
        .collect();
    assert!(feature(Feature::ArchAcf, &clustered) > feature(Feature::ArchAcf, &calm));
}

const SHIFT_INVARIANT: [Feature; 5] = [
    Feature::XAcf1,
    Feature::Diff2Acf1,
    Feature::Diff2Acf10,
    Feature::Diff1xPacf5,
    Feature::CrossingPoints,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_invariance(seed in 0u64..10_000, shift in -1e3f64..1e3) {
        let y = noise(60, seed);
        let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        for f in SHIFT_INVARIANT {
            let (a, b) = (feature(f, &y), feature(f, &shifted));
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{f}: {a} vs {b}");
        }
    }

    #[test]
    fn ranges_hold(seed in 0u64..10_000, n in 30usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n)
            .scan(0.0, |s, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                *s = 0.5 * *s + z;
                Some(*s)
            })
            .collect();
        let v = compute_features(&y, &FeatureCatalog::full()).unwrap();
        prop_assert!(v.values.iter().all(|x| x.is_finite()));
        let get = |f: Feature| v.values[Feature::ALL.iter().position(|x| *x == f).unwrap()];
        prop_assert!((-1.0..=1.0).contains(&get(Feature::XAcf1)));
        prop_assert!((-1.0..=1.0).contains(&get(Feature::Diff2Acf1)));
        prop_assert!((0.0..=1.0).contains(&get(Feature::Entropy)));
        prop_assert!((0.0..=1.0).contains(&get(Feature::Trend)));
        prop_assert!((0.0..=1.0).contains(&get(Feature::ArchR2)));
        prop_assert!((0.0..=1.0).contains(&get(Feature::GarchR2)));
        prop_assert!(get(Feature::CrossingPoints) <= (n - 1) as f64);
        prop_assert!(get(Feature::Diff2Acf10) >= 0.0 && get(Feature::Diff1xPacf5) >= 0.0);
        prop_assert!(get(Feature::UnitrootKpss) >= 0.0 && get(Feature::Nonlinearity) >= 0.0);
        prop_assert!((0.0..=1.0).contains(&get(Feature::Alpha)));
        prop_assert!(get(Feature::Beta) >= 0.0 && get(Feature::Beta) <= get(Feature::Alpha));
    }
}

#[test]
fn trend_of_a_straight_line() {
    let y: Vec<f64> = (1..=100).map(|t| t as f64).collect();
    assert!(feature(Feature::Trend, &y) >= 0.99);
}

/// Documented ranges on 10,000 seeded series of mixed shapes, all fifteen features.
#[test]
fn range_conformance_on_ten_thousand_series() {
    use rayon::prelude::*;
    let bad: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 30 + (seed % 50) as usize;
            let phi = [0.0, 0.5, 0.95, 1.0][(seed % 4) as usize];
            let drift = (seed % 3) as f64 * 0.2;
            let y: Vec<f64> = (0..n)
                .scan(0.0, |s, t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *s = phi * *s + z;
                    Some(*s + drift * t as f64)
                })
                .collect();
            let v = compute_features(&y, &FeatureCatalog::full()).ok()?;
            let get = |f: Feature| v.values[Feature::ALL.iter().position(|x| *x == f).unwrap()];
            let unit = |x: f64| (0.0..=1.0).contains(&x);
            let ok = v.values.iter().all(|x| x.is_finite())
                && get(Feature::Entropy) > 0.0
                && get(Feature::Entropy) < 1.0 + 1e-12
                && (0.0..1.0 + 1e-12).contains(&get(Feature::Trend))
                && get(Feature::XAcf1).abs() < 1.0
                && get(Feature::Diff2Acf1).abs() < 1.0
                && [Feature::Alpha, Feature::Beta, Feature::ArchR2, Feature::GarchR2].iter().all(|f| unit(get(*f)))
                && get(Feature::CrossingPoints).fract() == 0.0
                && [
                    Feature::CrossingPoints,
                    Feature::Diff1xPacf5,
                    Feature::Diff2Acf10,
                    Feature::ArchAcf,
                    Feature::GarchAcf,
                    Feature::UnitrootKpss,
                    Feature::Nonlinearity,
                ]
                .iter()
                .all(|f| get(*f) >= 0.0);
            (!ok).then(|| format!("seed {seed}: {:?}", v.values))
        })
        .collect();
    assert!(bad.is_empty(), "{} series out of range, first: {}", bad.len(), bad[0]);
}
