//! Seeded synthetic data for tests, benchmarks and the bundled example dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::models::DensityMatrix;
use crate::pool::{combination_weights, CoefficientMatrix};
use crate::series::TimeSeries;
use crate::stats::normal_log_pdf;

/// Zero-mean Gaussian noise whose standard deviation cycles through `sds`,
/// switching every `block` observations.
pub fn regime_series(n: usize, block: usize, sds: &[f64], seed: u64) -> Vec<f64> {
    assert!(block > 0 && !sds.is_empty(), "block and sds must be non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sds[(i / block) % sds.len()]
        })
        .collect()
}

/// A two-model pooling problem whose true weights follow the softmax model.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    pub density: DensityMatrix,
    pub features: FeatureMatrix,
    /// Column of the feature that drives the weights.
    pub informative: usize,
    pub beta: CoefficientMatrix,
}

/// `rows` observations from a mixture of `N(0, 1)` and `N(0, 3^2)` whose weight on
/// the first component is the softmax of `intercept + slope * x_informative`.
/// All `n_features` columns are independent standard normal draws.
pub fn selection_problem(
    rows: usize,
    n_features: usize,
    informative: usize,
    intercept: f64,
    slope: f64,
    seed: u64,
) -> Result<SelectionProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta = CoefficientMatrix::zeros(2, n_features);
    beta.set(0, 0, intercept);
    beta.set(0, informative + 1, slope);
    let sds = [1.0, 3.0];
    let mut feat_rows = Vec::with_capacity(rows);
    let mut dens_rows = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut design = vec![1.0];
        design.extend(&x);
        let w = combination_weights(&design, &beta, None)?;
        let comp = if rng.random::<f64>() < w.0[0] { 0 } else { 1 };
        let y = Normal::new(0.0, sds[comp]).expect("positive sd").sample(&mut rng);
        dens_rows.push(sds.iter().map(|&sd| normal_log_pdf(y, 0.0, sd)).collect());
        feat_rows.push(x);
    }
    let targets: Vec<usize> = (1..=rows).collect();
    let names = (0..n_features).map(|j| format!("f{}", j + 1)).collect();
    Ok(SelectionProblem {
        density: DensityMatrix::from_log_densities(vec!["low".into(), "high".into()], targets.clone(), dens_rows)?,
        features: FeatureMatrix::new(names, targets, feat_rows)?,
        informative,
        beta,
    })
}

/// Positive, trending, seasonal series loosely resembling a yearly or monthly
/// business panel. Each series gets its own level, slope, seasonal amplitude and
/// AR(1) noise.
pub fn business_panel(n_series: usize, length: usize, period: usize, seed: u64) -> Result<Vec<TimeSeries>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_series)
        .map(|k| {
            let level = rng.random_range(2_000.0..8_000.0);
            let slope = rng.random_range(-20.0..60.0);
            let amp = if period > 1 { rng.random_range(0.0..400.0) } else { 0.0 };
            let phi = rng.random_range(0.0..0.8);
            let noise_sd = rng.random_range(50.0..250.0);
            let mut e = 0.0;
            let values = (0..length)
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    e = phi * e + noise_sd * z;
                    let season = if period > 1 {
                        amp * (2.0 * std::f64::consts::PI * t as f64 / period as f64).sin()
                    } else {
                        0.0
                    };
                    level + slope * t as f64 + season + e
                })
                .collect();
            TimeSeries::new(format!("S{:03}", k + 1), values, period.max(1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_alternate() {
        let y = regime_series(600, 150, &[1.0, 3.0], 1);
        let sd = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        assert!(sd(&y[..150]) < 1.5 && sd(&y[150..300]) > 2.2);
        assert_eq!(y, regime_series(600, 150, &[1.0, 3.0], 1));
    }

    #[test]
    fn selection_problem_shapes() {
        let p = selection_problem(50, 5, 2, 0.0, 2.0, 3).unwrap();
        assert_eq!(p.density.n_rows(), 50);
        assert_eq!(p.features.n_features(), 5);
        assert_eq!(p.beta.get(0, 3), 2.0);
    }

    #[test]
    fn panel_is_deterministic() {
        let a = business_panel(3, 40, 12, 9).unwrap();
        assert_eq!(a, business_panel(3, 40, 12, 9).unwrap());
        assert_eq!(a[2].id(), "S003");
    }
}
