//! Forecast accuracy metrics and the Diebold-Mariano test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean absolute scaled error against in-sample one-step naive forecasts.
pub fn mase(train: &[f64], actuals: &[f64], forecasts: &[f64]) -> Result<f64> {
    if train.len() < 2 {
        return Err(Error::InsufficientHistory {
            required: 1,
            available: train.len(),
        });
    }
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("MASE needs at least one forecast".into()));
    }
    if actuals.len() != forecasts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} actuals vs {} forecasts",
            actuals.len(),
            forecasts.len()
        )));
    }
    let scale = train.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (train.len() - 1) as f64;
    if scale == 0.0 {
        return Err(Error::DegenerateScale);
    }
    let mae = actuals.iter().zip(forecasts).map(|(a, f)| (f - a).abs()).sum::<f64>() / actuals.len() as f64;
    Ok(mae / scale)
}

/// Arithmetic mean of realized log predictive densities.
pub fn average_log_score(log_densities: &[f64]) -> Result<f64> {
    if log_densities.is_empty() {
        return Err(Error::InvalidArgument("no log scores to average".into()));
    }
    if log_densities.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    Ok(log_densities.iter().sum::<f64>() / log_densities.len() as f64)
}

/// Outcome of [`dm_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    /// The loss differential has zero variance; statistic 0 and p-value 1 by convention.
    pub degenerate: bool,
    /// The long-run variance estimate was not positive and fell back to the lag-0 variance.
    pub variance_clamped: bool,
}

/// Two-sided Diebold-Mariano test of equal expected loss, with the Harvey,
/// Leybourne and Newbold small-sample correction and Student-t reference.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], horizon: usize) -> Result<DmResult> {
    let n = loss_a.len();
    if n != loss_b.len() {
        return Err(Error::DimensionMismatch(format!("loss lengths {n} and {}", loss_b.len())));
    }
    if n < 10 {
        return Err(Error::InsufficientHistory {
            required: 9,
            available: n,
        });
    }
    if horizon == 0 || horizon >= n {
        return Err(Error::InvalidArgument(format!("horizon must lie in 1..{n}, got {horizon}")));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    if d.iter().all(|&v| v == d[0]) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
            variance_clamped: false,
        });
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf;
    let gamma0 = autocov(0);
    let mut lrv = gamma0 + 2.0 * (1..horizon).map(autocov).sum::<f64>();
    let variance_clamped = !(lrv > 0.0);
    if variance_clamped {
        lrv = gamma0;
    }
    let h = horizon as f64;
    let correction = ((nf + 1.0 - 2.0 * h + h * (h - 1.0) / nf) / nf).sqrt();
    let statistic = correction * mean / (lrv / nf).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_value = (2.0 * t.sf(statistic.abs())).clamp(0.0, 1.0);
    Ok(DmResult {
        statistic,
        p_value,
        degenerate: false,
        variance_clamped,
    })
}

/// Scores of one mode on one series, with the per-point losses kept for DM tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub series: String,
    pub mode: String,
    pub average_ls: f64,
    pub mase: f64,
    /// Negative log predictive densities.
    pub density_losses: Vec<f64>,
    /// Absolute point-forecast errors.
    pub point_losses: Vec<f64>,
}

impl ScoreReport {
    pub fn new(
        series: impl Into<String>,
        mode: impl Into<String>,
        train: &[f64],
        actuals: &[f64],
        points: &[f64],
        log_densities: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            series: series.into(),
            mode: mode.into(),
            average_ls: average_log_score(log_densities)?,
            mase: mase(train, actuals, points)?,
            density_losses: log_densities.iter().map(|v| -v).collect(),
            point_losses: actuals.iter().zip(points).map(|(a, p)| (a - p).abs()).collect(),
        })
    }
}
