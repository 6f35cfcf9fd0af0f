//! Gaussian GARCH(1,1) with constant mean, fit by maximum likelihood.
//!
//! The optimizer works in an unconstrained space: `omega = exp(u1)`,
//! persistence `alpha + beta = MAX_PERSISTENCE * logistic(u2)` and the ARCH share
//! `alpha / (alpha + beta) = logistic(u3)`, which keeps every iterate
//! inside `omega > 0, alpha >= 0, beta >= 0, alpha + beta < 1`.
//!
//! Series with shifts in level of volatility pull the likelihood toward an
//! integrated process; the persistence cap keeps those fits usable (with a
//! finite unconditional variance) instead of drifting onto the boundary.

use super::{floored, require, ModelFit, ModelForecast, ModelKind, PredictiveDensity};
use crate::error::{Error, Result};
use crate::optim::{bfgs, BfgsOptions};
use crate::stats::{self, LN_SQRT_2PI};

const MIN_LENGTH: usize = 50;
const START_ALPHA: f64 = 0.05;
const START_BETA: f64 = 0.90;
/// Fits with `alpha + beta` at or above this are rejected.
const PERSISTENCE_LIMIT: f64 = 1.0 - 1e-6;
/// Upper end of the persistence transform.
pub const MAX_PERSISTENCE: f64 = 0.9999;

#[derive(Debug, Clone)]
pub struct GarchFit {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    /// Log-likelihood at the fixed starting point.
    pub start_loglik: f64,
    /// In-sample conditional variances `sigma_t^2`.
    pub variances: Vec<f64>,
    pub converged: bool,
}

impl GarchFit {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Standardized residuals `(y_t - mu) / sigma_t`.
    pub fn standardized_residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.variances)
            .map(|(v, s2)| (v - self.mu) / s2.sqrt())
            .collect()
    }

    fn degenerate(&self, reason: impl Into<String>) -> Error {
        Error::GarchDegenerate {
            reason: reason.into(),
            omega: self.omega,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

fn initial_variance(y: &[f64]) -> f64 {
    let m = stats::mean(y);
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64
}

/// Gaussian log-likelihood; the recursion starts from the sample variance.
///
/// Returns the log-likelihood and the conditional variance path.
pub fn garch_loglik(y: &[f64], mu: f64, omega: f64, alpha: f64, beta: f64) -> (f64, Vec<f64>) {
    let mut s2 = initial_variance(y).max(f64::MIN_POSITIVE);
    let mut ll = 0.0;
    let mut path = Vec::with_capacity(y.len());
    for (t, &v) in y.iter().enumerate() {
        if t > 0 {
            let e = y[t - 1] - mu;
            s2 = omega + alpha * e * e + beta * s2;
        }
        let e = v - mu;
        ll -= LN_SQRT_2PI + 0.5 * s2.ln() + 0.5 * e * e / s2;
        path.push(s2);
    }
    (ll, path)
}

/// Mean negative log-likelihood over unconstrained parameters `u`, with its gradient.
///
/// The variance derivatives follow the same recursion as the variances, so one
/// pass gives the value and all four partials.
fn nll_and_gradient(z: &[f64], s2_start: f64, u: &[f64]) -> (f64, Vec<f64>) {
    let (m, o, a, b) = unpack(u);
    let mut s2 = s2_start;
    // d s2 / d(m, o, a, b)
    let mut ds = [0.0; 4];
    let mut ll = 0.0;
    let mut g = [0.0; 4];
    for (t, &v) in z.iter().enumerate() {
        if t > 0 {
            let e = z[t - 1] - m;
            ds = [
                -2.0 * a * e + b * ds[0],
                1.0 + b * ds[1],
                e * e + b * ds[2],
                s2 + b * ds[3],
            ];
            s2 = o + a * e * e + b * s2;
        }
        let e = v - m;
        ll -= LN_SQRT_2PI + 0.5 * s2.ln() + 0.5 * e * e / s2;
        let dll_ds2 = 0.5 * (e * e / s2 - 1.0) / s2;
        for (gi, di) in g.iter_mut().zip(&ds) {
            *gi += dll_ds2 * di;
        }
        g[0] += e / s2;
    }
    if !ll.is_finite() {
        return (f64::INFINITY, vec![0.0; 4]);
    }
    let n = z.len() as f64;
    let share = logistic(u[3]);
    let persistence = a + b;
    let d_persistence = persistence * (1.0 - logistic(u[2]));
    let d_share = persistence * share * (1.0 - share);
    let grad = vec![
        -g[0] / n,
        -g[1] * o / n,
        -(g[2] * share + g[3] * (1.0 - share)) * d_persistence / n,
        -(g[2] - g[3]) * d_share / n,
    ];
    (-ll / n, grad)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn unpack(u: &[f64]) -> (f64, f64, f64, f64) {
    let omega = u[1].exp();
    let persistence = MAX_PERSISTENCE * logistic(u[2]);
    let share = logistic(u[3]);
    (u[0], omega, persistence * share, persistence * (1.0 - share))
}

/// Maximum-likelihood GARCH(1,1) from the fixed start `(alpha, beta) = (0.05, 0.90)`.
///
/// Does not reject boundary fits; see [`fit_predict_garch11`].
pub fn fit_garch11(y: &[f64]) -> Result<GarchFit> {
    if y.len() < 3 {
        return Err(Error::InsufficientHistory {
            required: 2,
            available: y.len(),
        });
    }
    let mean = stats::mean(y);
    let var = initial_variance(y);
    if !(var > 0.0) {
        return Err(Error::GarchDegenerate {
            reason: "zero sample variance".into(),
            omega: 0.0,
            alpha: 0.0,
            beta: 0.0,
        });
    }
    // scale to unit variance so the optimizer tolerances are dimensionless
    let scale = var.sqrt();
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();
    let persistence = START_ALPHA + START_BETA;
    let start = [
        0.0,
        (1.0 - persistence).ln(),
        logit(persistence / MAX_PERSISTENCE),
        logit(START_ALPHA / persistence),
    ];
    let s2_start = initial_variance(&z).max(f64::MIN_POSITIVE);
    let start_value = nll_and_gradient(&z, s2_start, &start).0;
    let opts = BfgsOptions {
        max_iterations: 300,
        gradient_tolerance: 1e-6,
        ..BfgsOptions::default()
    };
    let result = bfgs(|u| nll_and_gradient(&z, s2_start, u), &start, &opts);
    let u = if result.value.is_finite() && result.value <= start_value {
        result.x.clone()
    } else {
        start.to_vec()
    };
    let (m, o, alpha, beta) = unpack(&u);
    let mu = mean + scale * m;
    let omega = o * var;
    let (loglik, variances) = garch_loglik(y, mu, omega, alpha, beta);
    let (start_loglik, _) = garch_loglik(y, mean, var * (1.0 - persistence), START_ALPHA, START_BETA);
    Ok(GarchFit {
        mu,
        omega,
        alpha,
        beta,
        loglik,
        start_loglik,
        variances,
        converged: result.converged,
    })
}

/// GARCH(1,1) forecast: `sigma_{T+1}^2 = omega + alpha e_T^2 + beta sigma_T^2`,
/// then `sigma_{T+h}^2 = omega + (alpha + beta) sigma_{T+h-1}^2`.
pub fn fit_predict_garch11(history: &[f64], h: usize, sd_floor: f64) -> Result<ModelForecast> {
    require(history, MIN_LENGTH)?;
    let fit = fit_garch11(history)?;
    if !fit.loglik.is_finite() {
        return Err(fit.degenerate("non-finite log-likelihood"));
    }
    if fit.persistence() >= PERSISTENCE_LIMIT {
        return Err(fit.degenerate("alpha + beta on the stationarity boundary"));
    }
    let last = history.len() - 1;
    let e = history[last] - fit.mu;
    let mut s2 = fit.omega + fit.alpha * e * e + fit.beta * fit.variances[last];
    let mut flags = Vec::new();
    let mut densities = Vec::with_capacity(h);
    for k in 0..h {
        if k > 0 {
            s2 = fit.omega + fit.persistence() * s2;
        }
        densities.push(PredictiveDensity {
            mean: fit.mu,
            sd: floored(s2.sqrt(), sd_floor, &mut flags),
        });
    }
    Ok(ModelForecast {
        fit: ModelFit {
            kind: ModelKind::Garch11,
            parameters: vec![fit.mu, fit.omega, fit.alpha, fit.beta],
            fitted_on: history.len(),
        },
        densities,
        flags,
    })
}
