//! Additive-error, additive-trend exponential smoothing, ETS(A,A,N).

use super::{floored, require, ModelFit, ModelForecast, ModelKind, PredictiveDensity};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats;

pub const ETS_ALPHA_BOUNDS: (f64, f64) = (1e-4, 0.9999);
pub const ETS_BETA_MIN: f64 = 1e-4;
const INIT_POINTS: usize = 10;
const START: [f64; 2] = [0.1, 0.01];

/// Fitted ETS(A,A,N) smoothing parameters and final states.
#[derive(Debug, Clone)]
pub struct EtsFit {
    pub alpha: f64,
    pub beta: f64,
    pub level: f64,
    pub trend: f64,
    pub sse: f64,
    /// Maximum-likelihood one-step residual sd, `sqrt(sse / n)`.
    pub sigma: f64,
    pub iterations: usize,
}

/// Initial level and trend from a least-squares line through the first ten points.
fn initial_states(y: &[f64]) -> (f64, f64) {
    let k = y.len().min(INIT_POINTS);
    let xs: Vec<f64> = (1..=k).map(|i| i as f64).collect();
    let xm = stats::mean(&xs);
    let ym = stats::mean(&y[..k]);
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&y[..k]).map(|(x, v)| (x - xm) * (v - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - slope * xm, slope)
}

/// One-step in-sample sum of squared errors and final `(level, trend)`.
pub fn ets_sse(y: &[f64], alpha: f64, beta: f64) -> (f64, f64, f64) {
    let (mut level, mut trend) = initial_states(y);
    let mut sse = 0.0;
    for &v in y {
        let e = v - (level + trend);
        sse += e * e;
        level = level + trend + alpha * e;
        trend += beta * e;
    }
    (sse, level, trend)
}

fn project(x: &[f64]) -> (f64, f64, f64) {
    let a = x[0].clamp(ETS_ALPHA_BOUNDS.0, ETS_ALPHA_BOUNDS.1);
    let b = x[1].clamp(ETS_BETA_MIN, a);
    let dist2 = (x[0] - a).powi(2) + (x[1] - b).powi(2);
    (a, b, dist2)
}

/// Least-squares `(alpha, beta)` by bounded Nelder-Mead from `(0.1, 0.01)`.
pub fn fit_ets_aan(y: &[f64]) -> Result<EtsFit> {
    require(y, INIT_POINTS)?;
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let objective = |x: &[f64]| {
        let (a, b, dist2) = project(x);
        let (sse, _, _) = ets_sse(y, a, b);
        sse + dist2 * 1e4 * (scale + sse)
    };
    let opts = NelderMeadOptions {
        max_iterations: 2000,
        f_tolerance: 1e-12,
        x_tolerance: 1e-7,
        initial_step: 0.05,
    };
    let m = nelder_mead(objective, &START, &opts);
    if !m.converged || !m.value.is_finite() {
        return Err(Error::EtsNonConvergence {
            iterations: m.iterations,
            best: m.value,
            trace: m.trace,
        });
    }
    let (alpha, beta, _) = project(&m.x);
    let (sse, level, trend) = ets_sse(y, alpha, beta);
    Ok(EtsFit {
        alpha,
        beta,
        level,
        trend,
        sse,
        sigma: (sse / y.len() as f64).sqrt(),
        iterations: m.iterations,
    })
}

/// ETS(A,A,N) forecast with `sd_h = sigma * sqrt(1 + sum_{j<h} (alpha + beta j)^2)`.
pub fn fit_predict_ets_aan(history: &[f64], h: usize, sd_floor: f64) -> Result<ModelForecast> {
    let fit = fit_ets_aan(history)?;
    let mut flags = Vec::new();
    let sigma = floored(fit.sigma, sd_floor, &mut flags);
    let mut acc = 1.0;
    let mut densities = Vec::with_capacity(h);
    for k in 1..=h {
        if k > 1 {
            acc += (fit.alpha + fit.beta * (k - 1) as f64).powi(2);
        }
        densities.push(PredictiveDensity {
            mean: fit.level + k as f64 * fit.trend,
            sd: floored(sigma * acc.sqrt(), sd_floor, &mut flags),
        });
    }
    Ok(ModelForecast {
        fit: ModelFit {
            kind: ModelKind::EtsAan,
            parameters: vec![fit.alpha, fit.beta, fit.level, fit.trend, sigma],
            fitted_on: history.len(),
        },
        densities,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DEFAULT_SD_FLOOR;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy_line(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        (1..=50).map(|t| t as f64 + noise.sample(&mut rng)).collect()
    }

    // Independent oracle: exhaustive grid over the feasible (alpha, beta) region.
    fn grid_min_sse(y: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            let a = ETS_ALPHA_BOUNDS.0 + (ETS_ALPHA_BOUNDS.1 - ETS_ALPHA_BOUNDS.0) * i as f64 / 200.0;
            for j in 0..=100 {
                let b = ETS_BETA_MIN + (a - ETS_BETA_MIN) * j as f64 / 100.0;
                best = best.min(ets_sse(y, a, b).0);
            }
        }
        best
    }

    #[test]
    fn noisy_line_forecast() {
        let y = noisy_line(11);
        let f = fit_predict_ets_aan(&y, 3, DEFAULT_SD_FLOOR).unwrap();
        let fit = fit_ets_aan(&y).unwrap();
        assert!(fit.sse <= grid_min_sse(&y) * (1.0 + 1e-6), "{} vs grid", fit.sse);
        let sigma = f.fit.parameters[4];
        assert!((f.densities[0].mean - 51.0).abs() < 3.0 * sigma, "{}", f.densities[0].mean);
        assert_eq!(f.densities[0].sd, sigma);
        assert!(f.densities[1].sd > f.densities[0].sd);
        assert!(fit.beta <= fit.alpha && fit.beta >= ETS_BETA_MIN);
    }

    #[test]
    fn constant_with_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let jitter = Normal::new(0.0, 1e-6).unwrap();
        let y: Vec<f64> = (0..40).map(|_| 5.0 + jitter.sample(&mut rng)).collect();
        let f = fit_predict_ets_aan(&y, 4, DEFAULT_SD_FLOOR).unwrap();
        assert!(f.fit.parameters[3].abs() < 1e-5);
        for d in &f.densities {
            assert!((d.mean - 5.0).abs() < 1e-4);
        }
    }

    #[test]
    fn exact_constant() {
        let f = fit_predict_ets_aan(&[5.0; 20], 2, DEFAULT_SD_FLOOR).unwrap();
        assert_eq!(f.densities[1].mean, 5.0);
        assert_eq!(f.densities[0].sd, DEFAULT_SD_FLOOR);
    }

    #[test]
    fn too_short() {
        assert!(fit_predict_ets_aan(&[1.0; 9], 1, DEFAULT_SD_FLOOR).is_err());
    }
}
