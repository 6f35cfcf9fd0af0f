//! Individual feature statistics. Every function takes the raw history slice.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::models::{fit_ets_aan, fit_garch11};
use crate::stats;

const ARCH_LAGS: usize = 12;

pub(crate) fn x_acf1(y: &[f64]) -> f64 {
    stats::acf(y, 1).map_or(0.0, |a| a[0])
}

pub(crate) fn diff2_acf1(y: &[f64]) -> f64 {
    x_acf1(&stats::diff(&stats::diff(y)))
}

pub(crate) fn diff2_acf10(y: &[f64]) -> f64 {
    stats::acf(&stats::diff(&stats::diff(y)), 10).map_or(0.0, |a| a.iter().map(|v| v * v).sum())
}

pub(crate) fn diff1x_pacf5(y: &[f64]) -> f64 {
    stats::acf(&stats::diff(y), 5).map_or(0.0, |a| stats::pacf_from_acf(&a).iter().map(|v| v * v).sum())
}

/// Number of switches between "above the median" and "at or below the median".
pub(crate) fn crossing_points(y: &[f64]) -> f64 {
    let m = stats::median(y);
    y.windows(2).filter(|w| (w[0] > m) != (w[1] > m)).count() as f64
}

/// Raw periodogram at the Fourier frequencies `k = 1 ..= n/2`.
pub(crate) fn periodogram(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut buf: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Shannon entropy of the normalized periodogram divided by `log(#frequencies)`.
pub(crate) fn entropy(y: &[f64]) -> f64 {
    if y.iter().all(|&v| v == y[0]) {
        return 1.0;
    }
    let spec = periodogram(y);
    let total: f64 = spec.iter().sum();
    if !(total > 0.0) || spec.len() < 2 {
        return 1.0;
    }
    let h: f64 = spec
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    (h / (spec.len() as f64).ln()).clamp(0.0, 1.0)
}

/// `max(0, 1 - Var(residual) / Var(y))` after removing an orthogonal cubic in time.
pub(crate) fn trend(y: &[f64]) -> f64 {
    let n = y.len();
    let var_y = stats::variance(y);
    if !(var_y > 0.0) {
        return 0.0;
    }
    let scale = (n - 1).max(1) as f64;
    let t: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / scale - 1.0).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(4);
    for degree in 0..4 {
        let mut v: Vec<f64> = t.iter().map(|x| x.powi(degree)).collect();
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-10 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut resid = y.to_vec();
    for q in &basis {
        let c = dot(q, &resid);
        resid.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
    (1.0 - stats::variance(&resid) / var_y).max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn kpss_lags(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Level-stationarity KPSS statistic with a Bartlett-kernel long-run variance.
pub(crate) fn unitroot_kpss(y: &[f64]) -> f64 {
    let n = y.len();
    let m = stats::mean(y);
    let e: Vec<f64> = y.iter().map(|v| v - m).collect();
    let mut partial = 0.0;
    let mut eta = 0.0;
    for v in &e {
        partial += v;
        eta += partial * partial;
    }
    let nf = n as f64;
    eta /= nf * nf;
    let lags = kpss_lags(n);
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / nf;
    for l in 1..=lags.min(n - 1) {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let cov = e[l..].iter().zip(&e[..n - l]).map(|(a, b)| a * b).sum::<f64>() / nf;
        lrv += 2.0 * w * cov;
    }
    if lrv > 0.0 {
        eta / lrv
    } else {
        0.0
    }
}

/// ETS(A,A,N) smoothing parameters; `(alpha, beta)`.
pub(crate) fn ets_parameters(y: &[f64]) -> (f64, f64) {
    match fit_ets_aan(y) {
        Ok(fit) => (fit.alpha, fit.beta),
        // the simplex search only fails to settle on plateaus; report the start
        Err(_) => (0.1, 0.01),
    }
}

/// `(acf statistic, r2 statistic)` of the squared demeaned series.
pub(crate) fn arch_stats(x: &[f64]) -> (f64, f64) {
    let m = stats::mean(x);
    let sq: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
    let acf = stats::acf(&sq, ARCH_LAGS).map_or(0.0, |a| a.iter().map(|v| v * v).sum());
    let r2 = if sq.len() > 2 * ARCH_LAGS + 1 {
        let rows: Vec<Vec<f64>> = (ARCH_LAGS..sq.len())
            .map(|t| {
                let mut r = Vec::with_capacity(ARCH_LAGS + 1);
                r.push(1.0);
                r.extend((1..=ARCH_LAGS).map(|k| sq[t - k]));
                r
            })
            .collect();
        stats::ols(&rows, &sq[ARCH_LAGS..]).map_or(0.0, |f| f.r2)
    } else {
        0.0
    };
    (acf, r2)
}

/// Arch statistics of the standardized residuals of a GARCH(1,1) fit.
pub(crate) fn garch_stats(y: &[f64]) -> (f64, f64) {
    let m = stats::mean(y);
    let z: Vec<f64> = y.iter().map(|v| v - m).collect();
    match fit_garch11(&z) {
        Ok(fit) if fit.loglik.is_finite() => arch_stats(&fit.standardized_residuals(&z)),
        _ => arch_stats(&z),
    }
}

/// `n * R^2` from regressing AR(1) residuals on `1, y, y^2, y^3` (lagged).
pub(crate) fn nonlinearity(y: &[f64]) -> f64 {
    let sd = stats::sd(y);
    if !(sd > 0.0) {
        return 0.0;
    }
    let m = stats::mean(y);
    let z: Vec<f64> = y.iter().map(|v| (v - m) / sd).collect();
    let lin: Vec<Vec<f64>> = z[..z.len() - 1].iter().map(|&v| vec![1.0, v]).collect();
    let Ok(ar) = stats::ols(&lin, &z[1..]) else {
        return 0.0;
    };
    let cubic: Vec<Vec<f64>> = z[..z.len() - 1].iter().map(|&v| vec![1.0, v, v * v, v * v * v]).collect();
    stats::ols(&cubic, &ar.residuals).map_or(0.0, |f| (z.len() - 1) as f64 * f.r2)
}
