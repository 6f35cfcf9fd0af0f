//! AR(p) with intercept, order chosen by AIC.

use super::{floored, require, ModelFit, ModelFlag, ModelForecast, ModelKind, PredictiveDensity};
use crate::error::Result;
use crate::stats;

pub(super) fn min_length(max_order: usize) -> usize {
    (4 * max_order).max(max_order + 2).max(2)
}

#[derive(Debug, Clone)]
pub struct ArFit {
    pub order: usize,
    pub intercept: f64,
    pub phi: Vec<f64>,
    /// Maximum-likelihood innovation sd, `sqrt(rss / n_eff)`.
    pub sigma: f64,
    /// AIC for each candidate order `0..=max_order`, on a common sample.
    pub aic: Vec<f64>,
    pub flags: Vec<ModelFlag>,
}

fn lagged_design(y: &[f64], p: usize, start: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows = (start..y.len())
        .map(|t| {
            let mut r = Vec::with_capacity(p + 1);
            r.push(1.0);
            r.extend((1..=p).map(|k| y[t - k]));
            r
        })
        .collect();
    (rows, y[start..].to_vec())
}

/// Whether all roots of `1 - phi_1 z - ... - phi_p z^p` lie outside the unit circle,
/// checked by stepping the coefficients down to partial autocorrelations.
pub(crate) fn is_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        a = (0..p - 1).map(|j| (a[j] + k * a[p - 2 - j]) / denom).collect();
    }
    true
}

/// Least-squares AR fit with the order minimizing AIC over `0..=max_order`.
///
/// All candidate orders are compared on the same effective sample
/// (`t > max_order`). A non-stationary winner is reduced order by order.
pub fn fit_ar(y: &[f64], max_order: usize) -> Result<ArFit> {
    require(y, min_length(max_order))?;
    let start = max_order;
    let n_eff = (y.len() - start) as f64;
    let mut fits = Vec::with_capacity(max_order + 1);
    let mut aic = Vec::with_capacity(max_order + 1);
    for p in 0..=max_order {
        let (x, resp) = lagged_design(y, p, start);
        let fit = stats::ols(&x, &resp)?;
        let sigma2 = fit.rss / n_eff;
        let crit = if sigma2 > 0.0 {
            n_eff * sigma2.ln() + 2.0 * (p as f64 + 1.0)
        } else {
            f64::NEG_INFINITY
        };
        aic.push(crit);
        fits.push(fit);
    }
    let best = (0..=max_order)
        .min_by(|&a, &b| aic[a].total_cmp(&aic[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut flags = Vec::new();
    let mut order = best;
    while order > 0 && !is_stationary(&fits[order].coefficients[1..]) {
        order -= 1;
    }
    if order != best {
        flags.push(ModelFlag::OrderReduced { from: best, to: order });
    }
    let fit = &fits[order];
    Ok(ArFit {
        order,
        intercept: fit.coefficients[0],
        phi: fit.coefficients[1..].to_vec(),
        sigma: (fit.rss / n_eff).sqrt(),
        aic,
        flags,
    })
}

/// AR forecast: recursive mean, `sd_h = sigma * sqrt(sum_{j<h} psi_j^2)`.
pub fn fit_predict_ar(history: &[f64], h: usize, max_order: usize, sd_floor: f64) -> Result<ModelForecast> {
    let fit = fit_ar(history, max_order)?;
    let mut flags = fit.flags.clone();
    let sigma = floored(fit.sigma, sd_floor, &mut flags);
    let p = fit.order;

    let mut path: Vec<f64> = history[history.len() - p..].to_vec();
    let mut psi = vec![1.0];
    let mut psi_sq = 0.0;
    let mut densities = Vec::with_capacity(h);
    for k in 0..h {
        let n = path.len();
        let mean = fit.intercept + (1..=p).map(|j| fit.phi[j - 1] * path[n - j]).sum::<f64>();
        path.push(mean);
        if k > 0 {
            let next = (1..=p.min(k)).map(|j| fit.phi[j - 1] * psi[k - j]).sum::<f64>();
            psi.push(next);
        }
        psi_sq += psi[k] * psi[k];
        densities.push(PredictiveDensity {
            mean,
            sd: floored(sigma * psi_sq.sqrt(), sd_floor, &mut flags),
        });
    }

    let mut parameters = vec![fit.intercept];
    parameters.extend(&fit.phi);
    parameters.push(sigma);
    Ok(ModelForecast {
        fit: ModelFit {
            kind: ModelKind::Ar,
            parameters,
            fitted_on: history.len(),
        },
        densities,
        flags,
    })
}
