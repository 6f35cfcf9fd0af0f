//! Feature-driven mixture weights and the log posterior of their coefficients.
//!
//! Weights for `m` models come from `m - 1` linear predictors
//! `eta_i = x' beta_i` with the last model pinned at `eta_m = 0`:
//! `w_i = exp(eta_i) / (1 + sum_j exp(eta_j))`, `w_m = 1 / (1 + sum_j exp(eta_j))`.
//! All mixture arithmetic is carried out in log space.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::DensityMatrix;
use crate::stats::{log_sum_exp, LN_SQRT_2PI};

/// `(m - 1) x (n + 1)` coefficients; column 0 is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CoefficientMatrix {
    /// All-zero coefficients for `n_models` models and `n_features` features.
    pub fn zeros(n_models: usize, n_features: usize) -> Self {
        let rows = n_models.saturating_sub(1);
        let cols = n_features + 1;
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(1, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("coefficient rows must be equal and nonempty".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }

    /// Number of non-reference models (`m - 1`).
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    /// Intercept plus features (`n + 1`).
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn n_models(&self) -> usize {
        self.rows + 1
    }

    pub fn n_features(&self) -> usize {
        self.cols - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Keeps the intercepts and pads with zero feature coefficients.
    pub fn embed_intercepts(&self, n_features: usize) -> Self {
        let mut out = Self::zeros(self.n_models(), n_features);
        for i in 0..self.rows {
            out.set(i, 0, self.get(i, 0));
        }
        out
    }

    /// Zeroes every entry the selection switches off.
    pub fn masked(&self, selection: Option<&SelectionMatrix>) -> Self {
        let mut out = self.clone();
        if let Some(sel) = selection {
            for i in 0..self.rows {
                for j in 0..sel.n_features() {
                    if !sel.get(i, j) {
                        out.set(i, j + 1, 0.0);
                    }
                }
            }
        }
        out
    }

    fn check(&self, n_models: usize, n_features: usize) -> Result<()> {
        if self.rows + 1 != n_models || self.cols != n_features + 1 {
            return Err(Error::DimensionMismatch(format!(
                "coefficients are {}x{}, expected {}x{}",
                self.rows,
                self.cols,
                n_models.saturating_sub(1),
                n_features + 1
            )));
        }
        Ok(())
    }
}

/// `(m - 1) x n` feature indicators; intercepts are always active and not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<bool>,
}

impl SelectionMatrix {
    pub fn all(n_models: usize, n_features: usize) -> Self {
        Self::filled(n_models, n_features, true)
    }

    pub fn none(n_models: usize, n_features: usize) -> Self {
        Self::filled(n_models, n_features, false)
    }

    fn filled(n_models: usize, n_features: usize, v: bool) -> Self {
        let rows = n_models.saturating_sub(1);
        Self {
            rows,
            cols: n_features,
            values: vec![v; rows * n_features],
        }
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("selection rows must have equal length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_features(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.values[i * self.cols + j] = v;
    }

    pub fn flip(&mut self, i: usize, j: usize) {
        let v = self.get(i, j);
        self.set(i, j, !v);
    }

    /// Selected features in row `i`.
    pub fn count(&self, i: usize) -> usize {
        self.values[i * self.cols..(i + 1) * self.cols].iter().filter(|&&b| b).count()
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.rows)
            .map(|i| self.values[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    fn check(&self, beta: &CoefficientMatrix) -> Result<()> {
        if self.rows != beta.n_rows() || self.cols != beta.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "selection is {}x{}, coefficients need {}x{}",
                self.rows,
                self.cols,
                beta.n_rows(),
                beta.n_features()
            )));
        }
        Ok(())
    }
}

/// Whether coefficient `(i, j)` (column `j` of the coefficient matrix) is free.
pub fn is_active(selection: Option<&SelectionMatrix>, i: usize, j: usize) -> bool {
    j == 0 || selection.is_none_or(|s| s.get(i, j - 1))
}

/// Independent `N(0, sigma2)` priors on active coefficients; indicators
/// `Bernoulli(p)` with `p ~ Beta(1, 1)` integrated out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub sigma2: f64,
}

impl PriorConfig {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { sigma2: 1e3 }
    }
}

/// Mixture weights over `m` models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn equal(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arithmetic mean of several weight vectors.
    pub fn mean_of(ws: &[WeightVector]) -> Result<Self> {
        let first = ws.first().ok_or_else(|| Error::InvalidArgument("no weight vectors to average".into()))?;
        let m = first.len();
        let mut acc = vec![0.0; m];
        for w in ws {
            if w.len() != m {
                return Err(Error::DimensionMismatch("weight vectors differ in length".into()));
            }
            acc.iter_mut().zip(&w.0).for_each(|(a, b)| *a += b);
        }
        Ok(WeightVector(acc.into_iter().map(|a| a / ws.len() as f64).collect()))
    }
}

/// Log weights for one design row `x = (1, features...)`.
pub fn log_weights(x: &[f64], beta: &CoefficientMatrix, selection: Option<&SelectionMatrix>) -> Result<Vec<f64>> {
    if x.len() != beta.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "design row has {} entries, coefficients have {} columns",
            x.len(),
            beta.n_cols()
        )));
    }
    if let Some(sel) = selection {
        sel.check(beta)?;
    }
    let mut eta: Vec<f64> = (0..beta.n_rows())
        .map(|i| {
            beta.row(i)
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(j, _)| is_active(selection, i, *j))
                .map(|(_, (b, v))| b * v)
                .sum()
        })
        .collect();
    eta.push(0.0);
    let norm = log_sum_exp(&eta);
    Ok(eta.into_iter().map(|e| e - norm).collect())
}

/// Softmax weights with the last model as reference.
pub fn combination_weights(
    x: &[f64],
    beta: &CoefficientMatrix,
    selection: Option<&SelectionMatrix>,
) -> Result<WeightVector> {
    Ok(WeightVector(log_weights(x, beta, selection)?.into_iter().map(f64::exp).collect()))
}

/// `(1, features...)` for row `r` of a feature matrix.
pub fn design_row(features: &FeatureMatrix, r: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(features.n_features() + 1);
    x.push(1.0);
    x.extend_from_slice(features.row(r));
    x
}

/// `sum_t log(sum_i w_{i,t} p_{i,t})`.
pub fn pooled_log_score(density: &DensityMatrix, weights: &[WeightVector]) -> Result<f64> {
    if weights.len() != density.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} weight vectors for {} density rows",
            weights.len(),
            density.n_rows()
        )));
    }
    let mut total = 0.0;
    for (r, w) in weights.iter().enumerate() {
        if w.len() != density.n_models() {
            return Err(Error::DimensionMismatch(format!("weight vector {r} has {} entries", w.len())));
        }
        let terms: Vec<f64> = w.0.iter().zip(density.row(r)).map(|(wi, lp)| wi.ln() + lp).collect();
        total += log_sum_exp(&terms);
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteScore);
    }
    Ok(total)
}

/// Per-row log mixture densities for the given weights.
pub fn pooled_log_densities(density: &DensityMatrix, weights: &[WeightVector]) -> Result<Vec<f64>> {
    weights
        .iter()
        .enumerate()
        .map(|(r, w)| {
            let terms: Vec<f64> = w.0.iter().zip(density.row(r)).map(|(wi, lp)| wi.ln() + lp).collect();
            let v = log_sum_exp(&terms);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteScore)
            }
        })
        .collect()
}

/// `log[k! (n - k)! / (n + 1)!]`: the Beta(1,1)-Bernoulli marginal of one indicator row.
pub fn indicator_log_prior(k: usize, n: usize) -> f64 {
    ln_gamma(k as f64 + 1.0) + ln_gamma((n - k) as f64 + 1.0) - ln_gamma(n as f64 + 2.0)
}

/// Gaussian log prior of active coefficients plus, with a selection, the indicator prior.
pub fn log_prior(beta: &CoefficientMatrix, selection: Option<&SelectionMatrix>, prior: &PriorConfig) -> f64 {
    let norm = -0.5 * prior.sigma2.ln() - LN_SQRT_2PI;
    let mut lp = 0.0;
    for i in 0..beta.n_rows() {
        for j in 0..beta.n_cols() {
            if is_active(selection, i, j) {
                let b = beta.get(i, j);
                lp += norm - 0.5 * b * b / prior.sigma2;
            }
        }
    }
    if let Some(sel) = selection {
        for i in 0..sel.n_rows() {
            lp += indicator_log_prior(sel.count(i), sel.n_features());
        }
    }
    lp
}

/// Weights for every row of a (standardized) feature matrix.
pub fn weights_for_rows(
    features: &FeatureMatrix,
    beta: &CoefficientMatrix,
    selection: Option<&SelectionMatrix>,
) -> Result<Vec<WeightVector>> {
    (0..features.n_rows())
        .map(|r| combination_weights(&design_row(features, r), beta, selection))
        .collect()
}

/// The log posterior of the coefficients for fixed data, with its gradient.
#[derive(Debug, Clone, Copy)]
pub struct Posterior<'a> {
    pub density: &'a DensityMatrix,
    pub features: &'a FeatureMatrix,
    pub prior: PriorConfig,
    pub selection: Option<&'a SelectionMatrix>,
}

impl<'a> Posterior<'a> {
    pub fn new(
        density: &'a DensityMatrix,
        features: &'a FeatureMatrix,
        prior: PriorConfig,
        selection: Option<&'a SelectionMatrix>,
    ) -> Result<Self> {
        if density.n_rows() != features.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} density rows vs {} feature rows",
                density.n_rows(),
                features.n_rows()
            )));
        }
        if let Some(sel) = selection {
            if sel.n_rows() + 1 != density.n_models() || sel.n_features() != features.n_features() {
                return Err(Error::DimensionMismatch("selection shape does not match the pool".into()));
            }
        }
        Ok(Self {
            density,
            features,
            prior,
            selection,
        })
    }

    /// Zero coefficients of the right shape.
    pub fn zeros(&self) -> CoefficientMatrix {
        CoefficientMatrix::zeros(self.density.n_models(), self.features.n_features())
    }

    /// Log score plus log prior.
    pub fn value(&self, beta: &CoefficientMatrix) -> Result<f64> {
        Ok(self.value_and_gradient(beta, false)?.0)
    }

    /// Log posterior and its gradient (inactive entries have gradient 0).
    pub fn value_and_gradient(&self, beta: &CoefficientMatrix, with_gradient: bool) -> Result<(f64, CoefficientMatrix)> {
        let m = self.density.n_models();
        beta.check(m, self.features.n_features())?;
        if let Some(sel) = self.selection {
            sel.check(beta)?;
        }
        // inactive entries are zeroed once so the row loop needs no mask lookups
        let masked = beta.masked(self.selection);
        let cols = masked.cols;
        let mut grad = CoefficientMatrix::zeros(m, self.features.n_features());
        let mut score = 0.0;
        let mut lw = vec![0.0; m];
        let mut terms = vec![0.0; m];
        for r in 0..self.density.n_rows() {
            let x = self.features.row(r);
            for (i, l) in lw.iter_mut().enumerate().take(m - 1) {
                let b = &masked.values[i * cols..(i + 1) * cols];
                let mut eta = 0.0;
                eta += b[0];
                for (bj, xj) in b[1..].iter().zip(x) {
                    eta += bj * xj;
                }
                *l = eta;
            }
            lw[m - 1] = 0.0;
            let norm = log_sum_exp(&lw);
            let dens = self.density.row(r);
            for i in 0..m {
                lw[i] -= norm;
                terms[i] = lw[i] + dens[i];
            }
            let lq = log_sum_exp(&terms);
            score += lq;
            if with_gradient {
                for i in 0..m - 1 {
                    let coef = (terms[i] - lq).exp() - lw[i].exp();
                    let g = &mut grad.values[i * cols..(i + 1) * cols];
                    g[0] += coef;
                    for (gj, xj) in g[1..].iter_mut().zip(x) {
                        *gj += xj * coef;
                    }
                }
            }
        }
        if !score.is_finite() {
            return Err(Error::NonFiniteScore);
        }
        if with_gradient {
            for i in 0..m - 1 {
                for j in 0..cols {
                    let k = i * cols + j;
                    grad.values[k] = if is_active(self.selection, i, j) {
                        grad.values[k] - masked.values[k] / self.prior.sigma2
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok((score + log_prior(&masked, self.selection, &self.prior), grad))
    }

    /// Pooled log score (no prior) at `beta`.
    pub fn log_score(&self, beta: &CoefficientMatrix) -> Result<f64> {
        pooled_log_score(self.density, &weights_for_rows(self.features, beta, self.selection)?)
    }
}

/// Log posterior: pooled log score plus log prior (normalizing constant dropped).
pub fn log_posterior(
    beta: &CoefficientMatrix,
    selection: Option<&SelectionMatrix>,
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
) -> Result<f64> {
    Posterior::new(density, features, *prior, selection)?.value(beta)
}

/// Analytic gradient of [`log_posterior`] with respect to `beta`.
pub fn grad_log_posterior(
    beta: &CoefficientMatrix,
    selection: Option<&SelectionMatrix>,
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
) -> Result<CoefficientMatrix> {
    Ok(Posterior::new(density, features, *prior, selection)?
        .value_and_gradient(beta, true)?
        .1)
}
