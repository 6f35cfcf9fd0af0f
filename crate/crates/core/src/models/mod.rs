//! Component forecasting models with Gaussian plug-in predictive densities.

mod ar;
mod ets;
mod garch;
mod matrix;
mod naive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use ar::{fit_ar, fit_predict_ar, ArFit};
pub use ets::{ets_sse, fit_ets_aan, fit_predict_ets_aan, EtsFit, ETS_ALPHA_BOUNDS, ETS_BETA_MIN};
pub use garch::{fit_garch11, fit_predict_garch11, garch_loglik, GarchFit};
pub use matrix::{build_density_matrix, DensityMatrix};
pub use naive::{fit_predict_naive, fit_predict_rwdrift};

/// Default lower bound for every predictive standard deviation.
pub const DEFAULT_SD_FLOOR: f64 = 1e-8;

/// The component models available to a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    RwDrift,
    EtsAan,
    Ar,
    Garch11,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Naive,
        ModelKind::RwDrift,
        ModelKind::EtsAan,
        ModelKind::Ar,
        ModelKind::Garch11,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::RwDrift => "rw_drift",
            ModelKind::EtsAan => "ets_aan",
            ModelKind::Ar => "ar",
            ModelKind::Garch11 => "garch11",
        }
    }

    /// Shortest history the model accepts.
    pub fn min_length(&self, opts: &ModelOptions) -> usize {
        match self {
            ModelKind::Naive => 2,
            ModelKind::RwDrift => 3,
            ModelKind::EtsAan => 10,
            ModelKind::Ar => ar::min_length(opts.ar_max_order),
            ModelKind::Garch11 => 50,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "ets" && *k == ModelKind::EtsAan) || (key == "garch" && *k == ModelKind::Garch11))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model '{s}'")))
    }
}

/// Options shared by all component models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub sd_floor: f64,
    pub ar_max_order: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            sd_floor: DEFAULT_SD_FLOOR,
            ar_max_order: 5,
        }
    }
}

/// A Gaussian predictive density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDensity {
    pub mean: f64,
    pub sd: f64,
}

impl PredictiveDensity {
    pub fn log_density(&self, y: f64) -> f64 {
        stats::normal_log_pdf(y, self.mean, self.sd)
    }
}

/// Fitted parameters of a component model (maximum-likelihood plug-in values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub kind: ModelKind,
    /// Kind-specific parameters, see [`ModelFit::parameter_names`].
    pub parameters: Vec<f64>,
    pub fitted_on: usize,
}

impl ModelFit {
    pub fn parameter_names(&self) -> Vec<String> {
        match self.kind {
            ModelKind::Naive => vec!["sigma".into()],
            ModelKind::RwDrift => vec!["drift".into(), "sigma".into()],
            ModelKind::EtsAan => ["alpha", "beta", "level", "trend", "sigma"].map(String::from).to_vec(),
            ModelKind::Ar => {
                let mut v = vec!["intercept".to_string()];
                v.extend((1..self.parameters.len().saturating_sub(1)).map(|i| format!("phi{i}")));
                v.push("sigma".into());
                v
            }
            ModelKind::Garch11 => ["mu", "omega", "alpha", "beta"].map(String::from).to_vec(),
        }
    }
}

/// Conditions noticed while fitting that did not prevent a forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelFlag {
    /// The scale estimate was below the floor and was clamped.
    SdFloored,
    /// A non-stationary AR fit was reduced to a lower order.
    OrderReduced { from: usize, to: usize },
}

/// Forecast densities for horizons `1..=h` plus the fit that produced them.
#[derive(Debug, Clone)]
pub struct ModelForecast {
    pub fit: ModelFit,
    pub densities: Vec<PredictiveDensity>,
    pub flags: Vec<ModelFlag>,
}

/// Fits `kind` to `history` and forecasts `h` steps ahead.
pub fn fit_predict(kind: ModelKind, history: &[f64], h: usize, opts: &ModelOptions) -> Result<ModelForecast> {
    if h == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    match kind {
        ModelKind::Naive => fit_predict_naive(history, h, opts.sd_floor),
        ModelKind::RwDrift => fit_predict_rwdrift(history, h, opts.sd_floor),
        ModelKind::EtsAan => fit_predict_ets_aan(history, h, opts.sd_floor),
        ModelKind::Ar => fit_predict_ar(history, h, opts.ar_max_order, opts.sd_floor),
        ModelKind::Garch11 => fit_predict_garch11(history, h, opts.sd_floor),
    }
}

pub(crate) fn floored(sd: f64, floor: f64, flags: &mut Vec<ModelFlag>) -> f64 {
    if sd.is_finite() && sd >= floor {
        sd
    } else {
        if !flags.contains(&ModelFlag::SdFloored) {
            flags.push(ModelFlag::SdFloored);
        }
        floor
    }
}

pub(crate) fn require(history: &[f64], min: usize) -> Result<()> {
    if history.len() < min {
        return Err(Error::InsufficientHistory {
            required: min - 1,
            available: history.len(),
        });
    }
    Ok(())
}
