//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n - 1` divisor; zero for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Autocorrelations at lags `1..=max_lag` with the biased (divisor `n`) autocovariance.
///
/// Returns `None` when the series has zero variance.
pub fn acf(x: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let n = x.len();
    let m = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>();
    if c0 <= f64::MIN_POSITIVE * n as f64 || !c0.is_finite() {
        return None;
    }
    Some(
        (1..=max_lag)
            .map(|h| {
                if h >= n {
                    0.0
                } else {
                    dev[..n - h].iter().zip(&dev[h..]).map(|(a, b)| a * b).sum::<f64>() / c0
                }
            })
            .collect(),
    )
}

/// Partial autocorrelations from an autocorrelation sequence `rho[0] = ACF_1, ...` (Durbin-Levinson).
pub fn pacf_from_acf(rho: &[f64]) -> Vec<f64> {
    let k = rho.len();
    let mut out = Vec::with_capacity(k);
    let mut phi: Vec<f64> = Vec::with_capacity(k);
    for h in 0..k {
        let num = rho[h] - (0..h).map(|j| phi[j] * rho[h - 1 - j]).sum::<f64>();
        let den = 1.0 - (0..h).map(|j| phi[j] * rho[j]).sum::<f64>();
        let a = if den.abs() < 1e-300 { 0.0 } else { num / den };
        let prev = phi.clone();
        for j in 0..h {
            phi[j] = prev[j] - a * prev[h - 1 - j];
        }
        phi.push(a);
        out.push(a);
    }
    out
}

/// `log(sum(exp(v)))` with max shift.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn normal_log_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Centered R^2 (zero when the response is constant).
    pub r2: f64,
}

/// Regress `y` on the columns of `x` (row-major, `x.len() == y.len()`).
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "ols: {} rows of regressors for {} responses",
            x.len(),
            n
        )));
    }
    let p = x[0].len();
    let design = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let resp = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let beta = svd
        .solve(&resp, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("ols: {e}")))?;
    let fitted = &design * &beta;
    let residuals: Vec<f64> = resp.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|e| e * e).sum::<f64>();
    let ym = mean(y);
    let tss = y.iter().map(|v| (v - ym).powi(2)).sum::<f64>();
    let r2 = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    Ok(Ols {
        coefficients: beta.iter().copied().collect(),
        residuals,
        rss,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acf_examples() {
        assert_eq!(acf(&[1.0, 2.0, 3.0, 4.0], 1).unwrap()[0], 0.25);
        assert_eq!(acf(&[1.0, -1.0, 1.0, -1.0], 1).unwrap()[0], -0.75);
        assert!(acf(&[2.0; 5], 3).is_none());
    }

    #[test]
    fn pacf_of_ar1_acf() {
        // ACF of an AR(1) with phi = 0.6 is 0.6^h; its PACF is (0.6, 0, 0, ...)
        let rho: Vec<f64> = (1..=5).map(|h| 0.6f64.powi(h)).collect();
        let p = pacf_from_acf(&rho);
        assert!((p[0] - 0.6).abs() < 1e-12);
        for v in &p[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn sample_sd_uses_n_minus_one() {
        assert!((sd(&[2.0, -1.0]) - 2.121_320_343_559_642).abs() < 1e-12);
        assert_eq!(median(&[0.0, 2.0, 0.0, 2.0]), 1.0);
    }

    #[test]
    fn ols_recovers_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 + 3.0 * i as f64).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(fit.rss < 1e-18);
    }

    #[test]
    fn lse_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
