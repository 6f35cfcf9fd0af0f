//! Training pipeline, forecast-time weights and combined forecasts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::features::{
    compute_feature_matrix, compute_features, label_best_model, relieff_rank, select_top_k, FeatureCatalog,
    FeatureMatrix, RankedFeature, ReliefOptions,
};
use crate::inference::{gibbs_select, map_estimate, InferenceConfig, PosteriorDraw};
use crate::models::{build_density_matrix, fit_predict, DensityMatrix, ModelKind, ModelOptions, PredictiveDensity};
use crate::pool::{
    combination_weights, pooled_log_densities, pooled_log_score, weights_for_rows, CoefficientMatrix, PriorConfig,
    WeightVector,
};
use crate::series::TimeSeries;
use crate::standardize::{standardize, StandardizationStats};
use crate::stats::log_sum_exp;
use crate::window::WindowSpec;

/// How the combination weights are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Feature-driven weights at the posterior mode.
    Febama,
    /// Feature-driven weights averaged over variable-selection draws.
    FebamaVs,
    /// Equal weights.
    Sa,
    /// Constant weights maximizing the historical log score.
    Op,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Febama, Mode::FebamaVs, Mode::Sa, Mode::Op];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Febama => "febama",
            Mode::FebamaVs => "febama_vs",
            Mode::Sa => "sa",
            Mode::Op => "op",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "febama" => Ok(Mode::Febama),
            "febama_vs" | "febama+vs" | "febama-vs" | "vs" => Ok(Mode::FebamaVs),
            "sa" => Ok(Mode::Sa),
            "op" => Ok(Mode::Op),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

/// Everything the training pipeline needs besides the series and the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub models: Vec<ModelKind>,
    pub model_options: ModelOptions,
    pub spec: WindowSpec,
    pub prior: PriorConfig,
    /// Candidate features before screening.
    pub catalog: FeatureCatalog,
    /// Number of features kept after ReliefF screening; `None` keeps the whole catalog unranked.
    pub feature_count: Option<usize>,
    pub relief: ReliefOptions,
    pub inference: InferenceConfig,
}

impl PipelineConfig {
    pub fn new(models: Vec<ModelKind>, spec: WindowSpec, catalog: FeatureCatalog) -> Self {
        Self {
            models,
            model_options: ModelOptions::default(),
            spec,
            prior: PriorConfig::default(),
            catalog,
            feature_count: None,
            relief: ReliefOptions::default(),
            inference: InferenceConfig::default(),
        }
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidArgument("models: the pool is empty".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("models: '{m}' listed twice")));
            }
        }
        self.spec.validate()?;
        PriorConfig::new(self.prior.sigma2)?;
        self.inference.validate()?;
        if let Some(k) = self.feature_count {
            if k > self.catalog.len() {
                return Err(Error::InvalidArgument(format!(
                    "k: {k} features requested but the catalog has {}",
                    self.catalog.len()
                )));
            }
        }
        if !self.catalog.is_empty() {
            self.catalog.validate_window(&self.spec)?;
        }
        for kind in &self.models {
            let need = kind.min_length(&self.model_options);
            let have = self.spec.model_len(self.spec.min_length);
            if need > have {
                return Err(Error::InvalidArgument(format!(
                    "models: {kind} needs {need} observations, the window provides {have}"
                )));
            }
        }
        Ok(())
    }

    fn effective_catalog_len(&self) -> usize {
        self.feature_count.unwrap_or(self.catalog.len())
    }
}

/// Things that happened during training that did not stop it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrainNote {
    /// ReliefF could not run; the first `k` catalog features were kept.
    ScreeningSkipped { reason: String },
    /// The smallest class was too small for the configured neighbour count.
    NeighborsReduced { from: usize, to: usize },
    /// The posterior mode search stopped before meeting the gradient tolerance.
    MapNotConverged { iterations: usize },
    /// Some variable-selection proposals failed their conditional mode search.
    FailedProposals { count: usize },
}

/// A trained combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationFit {
    pub mode: Mode,
    pub models: Vec<ModelKind>,
    pub model_options: ModelOptions,
    pub spec: WindowSpec,
    pub prior: PriorConfig,
    pub catalog: FeatureCatalog,
    pub stats: StandardizationStats,
    /// Mode coefficients (`febama`, `op`).
    pub beta: Option<CoefficientMatrix>,
    /// Kept variable-selection draws (`febama_vs`).
    pub draws: Vec<PosteriorDraw>,
    pub ranking: Vec<RankedFeature>,
    pub inference: InferenceConfig,
    /// Pooled log score over the training rows.
    pub in_sample_log_score: f64,
    pub training_rows: usize,
    pub notes: Vec<TrainNote>,
}

impl CombinationFit {
    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    /// Weights for one raw (unstandardized) feature vector.
    pub fn weights_for_features(&self, raw: &[f64]) -> Result<WeightVector> {
        let m = self.models.len();
        match self.mode {
            Mode::Sa => Ok(WeightVector::equal(m)),
            Mode::FebamaVs if !self.draws.is_empty() => {
                let x = self.design(raw)?;
                let ws = self
                    .draws
                    .iter()
                    .map(|d| combination_weights(&x, &d.beta, Some(&d.selection)))
                    .collect::<Result<Vec<_>>>()?;
                WeightVector::mean_of(&ws)
            }
            _ => {
                let beta = self
                    .beta
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("fit carries no coefficients".into()))?;
                combination_weights(&self.design(raw)?, beta, None)
            }
        }
    }

    fn design(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![1.0];
        x.extend(self.stats.apply_row(raw)?);
        Ok(x)
    }

    /// Weights for the next observation after `history`.
    pub fn weights_after(&self, history: &[f64]) -> Result<WeightVector> {
        if self.mode == Mode::Sa || self.catalog.is_empty() {
            return self.weights_for_features(&[]);
        }
        let raw = compute_features(self.spec.feature_window.apply(history), &self.catalog)?;
        self.weights_for_features(&raw.values)
    }
}

/// ReliefF screening of `raw` down to `k` columns.
fn screen(
    raw: &FeatureMatrix,
    density: &DensityMatrix,
    catalog: &FeatureCatalog,
    k: usize,
    relief: &ReliefOptions,
    notes: &mut Vec<TrainNote>,
) -> Result<(FeatureCatalog, Vec<RankedFeature>)> {
    if k == 0 {
        return Ok((FeatureCatalog::intercept_only(), Vec::new()));
    }
    let labels = label_best_model(density);
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for &l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    let smallest = counts.values().copied().min().unwrap_or(0);
    let neighbours = relief.k_neighbors.min(smallest.saturating_sub(1));
    let fallback = |notes: &mut Vec<TrainNote>, reason: String| {
        notes.push(TrainNote::ScreeningSkipped { reason });
        let names: Vec<String> = catalog.names().into_iter().take(k).collect();
        FeatureCatalog::from_names(&names).map(|c| (c, Vec::new()))
    };
    if counts.len() < 2 {
        return fallback(notes, "every row has the same best model".into());
    }
    if neighbours == 0 {
        return fallback(notes, format!("smallest class has {smallest} instance(s)"));
    }
    if neighbours < relief.k_neighbors {
        notes.push(TrainNote::NeighborsReduced {
            from: relief.k_neighbors,
            to: neighbours,
        });
    }
    let opts = ReliefOptions {
        k_neighbors: neighbours,
        ..*relief
    };
    let ranking = relieff_rank(raw, &labels, &opts)?;
    Ok((select_top_k(&ranking, k)?, ranking))
}

/// Fitted coefficients for one mode on aligned training matrices.
struct Estimate {
    beta: Option<CoefficientMatrix>,
    draws: Vec<PosteriorDraw>,
    weights: Vec<WeightVector>,
}

fn estimate(
    mode: Mode,
    density: &DensityMatrix,
    features: &FeatureMatrix,
    prior: &PriorConfig,
    inference: &InferenceConfig,
    warm: &[CoefficientMatrix],
    notes: &mut Vec<TrainNote>,
) -> Result<Estimate> {
    let m = density.n_models();
    let n_rows = density.n_rows();
    if mode == Mode::Sa || m == 1 {
        let beta = (mode != Mode::Sa).then(|| CoefficientMatrix::zeros(m, features.n_features()));
        return Ok(Estimate {
            beta,
            draws: Vec::new(),
            weights: vec![WeightVector::equal(m); n_rows],
        });
    }
    let intercept = FeatureMatrix::empty(features.targets().to_vec());
    let op_warm: Vec<CoefficientMatrix> = warm.iter().filter(|w| w.n_features() == 0).cloned().collect();
    let op = map_estimate(density, &intercept, prior, None, inference, &op_warm).map_err(Error::at_stage("op"))?;
    if !op.converged {
        notes.push(TrainNote::MapNotConverged {
            iterations: op.iterations,
        });
    }
    if mode == Mode::Op || (mode == Mode::Febama && features.n_features() == 0) {
        let weights = weights_for_rows(&intercept, &op.beta, None)?;
        return Ok(Estimate {
            beta: Some(op.beta),
            draws: Vec::new(),
            weights,
        });
    }
    match mode {
        Mode::Febama => {
            let mut starts = vec![op.beta.embed_intercepts(features.n_features())];
            starts.extend(warm.iter().filter(|w| w.n_features() == features.n_features()).cloned());
            let map = map_estimate(density, features, prior, None, inference, &starts)
                .map_err(Error::at_stage("febama"))?;
            if !map.converged {
                notes.push(TrainNote::MapNotConverged {
                    iterations: map.iterations,
                });
            }
            let weights = weights_for_rows(features, &map.beta, None)?;
            Ok(Estimate {
                beta: Some(map.beta),
                draws: Vec::new(),
                weights,
            })
        }
        Mode::FebamaVs => {
            if features.n_features() == 0 {
                return Err(Error::InvalidArgument("k: variable selection needs at least one feature".into()));
            }
            let out = gibbs_select(density, features, prior, inference).map_err(Error::at_stage("variable selection"))?;
            if out.failed > 0 {
                notes.push(TrainNote::FailedProposals { count: out.failed });
            }
            let mut weights = Vec::with_capacity(n_rows);
            for r in 0..n_rows {
                let x = crate::pool::design_row(features, r);
                let ws = out
                    .draws
                    .iter()
                    .map(|d| combination_weights(&x, &d.beta, Some(&d.selection)))
                    .collect::<Result<Vec<_>>>()?;
                weights.push(WeightVector::mean_of(&ws)?);
            }
            Ok(Estimate {
                beta: None,
                draws: out.draws,
                weights,
            })
        }
        Mode::Sa | Mode::Op => unreachable!("handled above"),
    }
}

/// Standardized training matrix, or an empty one for intercept-only pools.
fn standardized(raw: &FeatureMatrix) -> Result<(FeatureMatrix, StandardizationStats)> {
    if raw.n_features() == 0 {
        return Ok((raw.clone(), StandardizationStats::empty()));
    }
    standardize(raw)
}

/// Builds the density and feature matrices for `series`, screens features,
/// standardizes them and estimates the combination for `mode`.
pub fn train_pipeline(series: &TimeSeries, config: &PipelineConfig, mode: Mode) -> Result<CombinationFit> {
    config.validate()?;
    let s = config.spec.min_length;
    if series.len() <= s + 1 {
        return Err(Error::InsufficientHistory {
            required: s + 1,
            available: series.len(),
        });
    }
    let density = build_density_matrix(series, &config.models, &config.spec, &config.model_options)
        .map_err(Error::at_stage("density matrix"))?;
    let wants_features = matches!(mode, Mode::Febama | Mode::FebamaVs) && config.effective_catalog_len() > 0;
    let raw = if wants_features {
        compute_feature_matrix(series, &config.spec, &config.catalog).map_err(Error::at_stage("features"))?
    } else {
        FeatureMatrix::empty(density.targets().to_vec())
    };

    let mut notes = Vec::new();
    let (catalog, ranking) = match config.feature_count {
        _ if !wants_features => (FeatureCatalog::intercept_only(), Vec::new()),
        None => (config.catalog.clone(), Vec::new()),
        Some(k) => screen(&raw, &density, &config.catalog, k, &config.relief, &mut notes)
            .map_err(Error::at_stage("screening"))?,
    };
    let raw = raw.select(&catalog.names())?;
    let (features, stats) = standardized(&raw).map_err(Error::at_stage("standardization"))?;

    let est = estimate(mode, &density, &features, &config.prior, &config.inference, &[], &mut notes)?;
    let in_sample_log_score = pooled_log_score(&density, &est.weights)?;
    Ok(CombinationFit {
        mode,
        models: config.models.clone(),
        model_options: config.model_options,
        spec: config.spec,
        prior: config.prior,
        catalog,
        stats,
        beta: est.beta,
        draws: est.draws,
        ranking,
        inference: config.inference,
        in_sample_log_score,
        training_rows: density.n_rows(),
        notes,
    })
}

/// One horizon of a combined forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub h: usize,
    pub point: f64,
    pub weights: WeightVector,
    pub components: Vec<PredictiveDensity>,
}

impl ForecastStep {
    /// Log density of the Gaussian mixture at `y`.
    pub fn log_density(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .0
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_density(y))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn mixture_mean(&self) -> f64 {
        self.point
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub mode: Mode,
    pub model_names: Vec<String>,
    pub horizon: usize,
    pub steps: Vec<ForecastStep>,
}

impl ForecastResult {
    pub fn points(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.point).collect()
    }

    pub fn weights(&self) -> Vec<WeightVector> {
        self.steps.iter().map(|s| s.weights.clone()).collect()
    }
}

/// Multi-step combined forecasts.
///
/// After each step the combined point forecast is appended to a private copy
/// of the history, features are recomputed and, unless `frozen_models` is set,
/// the component models are refit on the extended history. With frozen models
/// the components come from a single `horizon`-step forecast of each model.
pub fn forecast_h(fit: &CombinationFit, series: &TimeSeries, horizon: usize, frozen_models: bool) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if series.len() < fit.spec.min_length {
        return Err(Error::InsufficientHistory {
            required: fit.spec.min_length - 1,
            available: series.len(),
        });
    }
    let mut ext = series.values().to_vec();
    let frozen: Option<Vec<Vec<PredictiveDensity>>> = if frozen_models {
        let hist = fit.spec.model_window.apply(&ext);
        Some(
            fit.models
                .par_iter()
                .map(|&k| fit_predict(k, hist, horizon, &fit.model_options).map(|f| f.densities))
                .collect::<Result<Vec<_>>>()
                .map_err(Error::at_stage("component models"))?,
        )
    } else {
        None
    };

    let mut steps = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let weights = fit
            .weights_after(&ext)
            .map_err(|e| Error::FeaturesAt {
                t: ext.len() + 1,
                source: Box::new(e),
            })?;
        let components: Vec<PredictiveDensity> = match &frozen {
            Some(all) => all.iter().map(|d| d[h - 1]).collect(),
            None => {
                let hist = fit.spec.model_window.apply(&ext);
                fit.models
                    .par_iter()
                    .map(|&k| {
                        fit_predict(k, hist, 1, &fit.model_options)
                            .map(|f| f.densities[0])
                            .map_err(|e| Error::ModelAt {
                                t: ext.len() + 1,
                                model: k.name().to_string(),
                                source: Box::new(e),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let point: f64 = weights.0.iter().zip(&components).map(|(w, c)| w * c.mean).sum();
        ext.push(point);
        steps.push(ForecastStep {
            h,
            point,
            weights,
            components,
        });
    }
    Ok(ForecastResult {
        mode: fit.mode,
        model_names: fit.models.iter().map(|k| k.name().to_string()).collect(),
        horizon,
        steps,
    })
}

/// Options specific to the recursive out-of-sample protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OosOptions {
    /// First target index (1-based) that is scored.
    pub start_t: usize,
    /// Re-run ReliefF screening at every `t` instead of once on the initial window.
    pub reselect_features: bool,
}

/// Out-of-sample results for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    pub mode: Mode,
    pub targets: Vec<usize>,
    pub log_scores: Vec<f64>,
    pub points: Vec<f64>,
    pub actuals: Vec<f64>,
    pub weights: Vec<WeightVector>,
    pub average_log_score: f64,
    /// MASE of the one-step point forecasts, scaled on `y_1 .. y_{start_t - 1}`.
    pub mase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosReport {
    pub start_t: usize,
    pub catalog: FeatureCatalog,
    pub scores: Vec<ModeScores>,
}

impl OosReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeScores> {
        self.scores.iter().find(|s| s.mode == mode)
    }
}

/// Recursive one-step evaluation: for every `t >= start_t` each mode is trained
/// on targets before `t` only and its combined density is scored at `y_t`.
///
/// The density and raw feature rows are computed once for all targets; row `t`
/// depends on `y_1 .. y_{t-1}` alone, so reusing them never looks ahead.
pub fn recursive_oos_evaluate(
    series: &TimeSeries,
    config: &PipelineConfig,
    modes: &[Mode],
    options: &OosOptions,
) -> Result<OosReport> {
    config.validate()?;
    let s = config.spec.min_length;
    let total = series.len();
    let start_t = options.start_t;
    if start_t <= s {
        return Err(Error::InvalidArgument(format!("start_t ({start_t}) must exceed min_length ({s})")));
    }
    if start_t > total {
        return Err(Error::InvalidArgument(format!("start_t ({start_t}) exceeds the series length ({total})")));
    }
    if modes.iter().any(|m| *m != Mode::Sa) && start_t < s + 3 {
        return Err(Error::InvalidArgument(format!(
            "start_t must be at least min_length + 3 = {} to estimate weights",
            s + 3
        )));
    }
    let density = build_density_matrix(series, &config.models, &config.spec, &config.model_options)
        .map_err(Error::at_stage("density matrix"))?;
    let wants_features =
        modes.iter().any(|m| matches!(m, Mode::Febama | Mode::FebamaVs)) && config.effective_catalog_len() > 0;
    let raw_all = if wants_features {
        compute_feature_matrix(series, &config.spec, &config.catalog).map_err(Error::at_stage("features"))?
    } else {
        FeatureMatrix::empty(density.targets().to_vec())
    };

    let mut notes = Vec::new();
    let initial_catalog = match config.feature_count {
        _ if !wants_features => FeatureCatalog::intercept_only(),
        None => config.catalog.clone(),
        Some(k) => {
            screen(
                &raw_all.slice_targets(0, start_t),
                &density.slice_targets(0, start_t),
                &config.catalog,
                k,
                &config.relief,
                &mut notes,
            )?
            .0
        }
    };

    let y = series.values();
    let train_scale = &y[..start_t - 1];
    let scores = modes
        .par_iter()
        .map(|&mode| {
            let mut catalog = initial_catalog.clone();
            let mut prev: Vec<CoefficientMatrix> = Vec::new();
            let mut out = ModeScores {
                mode,
                targets: Vec::new(),
                log_scores: Vec::new(),
                points: Vec::new(),
                actuals: Vec::new(),
                weights: Vec::new(),
                average_log_score: 0.0,
                mase: None,
            };
            for t in start_t..=total {
                let mut step = || -> Result<(WeightVector, Vec<CoefficientMatrix>)> {
                    let dm = density.slice_targets(0, t);
                    if options.reselect_features && wants_features {
                        if let Some(k) = config.feature_count {
                            let mut scratch = Vec::new();
                            catalog = screen(
                                &raw_all.slice_targets(0, t),
                                &dm,
                                &config.catalog,
                                k,
                                &config.relief,
                                &mut scratch,
                            )?
                            .0;
                        }
                    }
                    let use_features = matches!(mode, Mode::Febama | Mode::FebamaVs);
                    let names = if use_features { catalog.names() } else { Vec::new() };
                    let raw = raw_all.select(&names)?;
                    let (train, stats) = standardized(&raw.slice_targets(0, t))?;
                    let warm: Vec<CoefficientMatrix> =
                        prev.iter().filter(|b| b.n_features() == train.n_features()).cloned().collect();
                    let est = estimate(mode, &dm, &train, &config.prior, &config.inference, &warm, &mut Vec::new())?;
                    let row = raw.targets().iter().position(|&x| x == t).expect("row for every target");
                    let mut x = vec![1.0];
                    x.extend(stats.apply_row(raw.row(row))?);
                    let w = match (&est.beta, mode) {
                        (_, Mode::Sa) => WeightVector::equal(density.n_models()),
                        (Some(b), _) => combination_weights(&x, b, None)?,
                        (None, _) => {
                            let ws = est
                                .draws
                                .iter()
                                .map(|d| combination_weights(&x, &d.beta, Some(&d.selection)))
                                .collect::<Result<Vec<_>>>()?;
                            WeightVector::mean_of(&ws)?
                        }
                    };
                    Ok((w, est.beta.into_iter().collect()))
                };
                let (w, next) = step().map_err(|e| Error::Stage {
                    stage: "recursive evaluation",
                    source: Box::new(Error::FeaturesAt { t, source: Box::new(e) }),
                })?;
                prev = next;
                let r = t - s - 1;
                let dm_row = density.select_rows(&[r]);
                let ls = pooled_log_densities(&dm_row, std::slice::from_ref(&w))?[0];
                let point: f64 = (0..density.n_models())
                    .map(|i| w.0[i] * density.component(r, i).map_or(f64::NAN, |c| c.mean))
                    .sum();
                out.targets.push(t);
                out.log_scores.push(ls);
                out.points.push(point);
                out.actuals.push(y[t - 1]);
                out.weights.push(w);
            }
            out.average_log_score = eval::average_log_score(&out.log_scores)?;
            out.mase = eval::mase(train_scale, &out.actuals, &out.points).ok();
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OosReport {
        start_t,
        catalog: initial_catalog,
        scores,
    })
}
