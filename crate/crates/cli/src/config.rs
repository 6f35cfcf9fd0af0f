//! Run configuration: a flat TOML document whose keys mirror the long CLI flags.
//!
//! ```toml
//! series = ["data/panel.csv"]   # CSV files to read
//! column = "value"              # value column
//! id_column = "id"              # optional: long format, one series per id
//! models = ["naive", "rw_drift", "ets_aan", "ar"]
//! mode = "febama"               # mode used by `train`
//! modes = ["febama", "op", "sa"]# modes used by `evaluate` and `benchmark`
//! features = []                 # candidate features, empty = all fifteen
//! k = 5                         # features kept after ReliefF screening, omit for all
//! min_length = 30               # history before the first training row
//! feature_window = "all"        # or a positive integer <= min_length
//! model_window = "all"
//! sigma2 = 10.0                 # prior variance of the coefficients
//! horizon = 18
//! seed = 42
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use featmix::features::{ReliefOptions, SampleCount};
use featmix::{
    FeatureCatalog, InferenceConfig, Mode, ModelKind, ModelOptions, PipelineConfig, PriorConfig, Window, WindowSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub series: Vec<PathBuf>,
    pub column: String,
    pub id_column: Option<String>,
    pub period: usize,
    pub skip_invalid: bool,
    pub models: Vec<String>,
    pub mode: String,
    pub modes: Vec<String>,
    pub features: Vec<String>,
    pub k: Option<usize>,
    pub min_length: usize,
    pub feature_window: Window,
    pub model_window: Window,
    pub sigma2: f64,
    pub ar_max_order: usize,
    pub sd_floor: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub restarts: usize,
    pub draws: usize,
    pub burn_in: usize,
    pub relief_neighbors: usize,
    pub relief_samples: Option<usize>,
    pub horizon: usize,
    /// First scored target of `evaluate`; defaults to the last `horizon` observations.
    pub start_t: Option<usize>,
    pub reselect_features: bool,
    pub frozen_models: bool,
    /// Trained fit used by `forecast`; defaults to `<output_dir>/fit_<id>.json`.
    pub fit: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            series: Vec::new(),
            column: "value".into(),
            id_column: None,
            period: 1,
            skip_invalid: false,
            models: ["naive", "rw_drift", "ets_aan", "ar"].map(String::from).to_vec(),
            mode: "febama".into(),
            modes: ["febama", "op", "sa"].map(String::from).to_vec(),
            features: Vec::new(),
            k: None,
            min_length: 30,
            feature_window: Window::All,
            model_window: Window::All,
            sigma2: 10.0,
            ar_max_order: 5,
            sd_floor: featmix::models::DEFAULT_SD_FLOOR,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            restarts: 2,
            draws: 100,
            burn_in: 50,
            relief_neighbors: 5,
            relief_samples: None,
            horizon: 18,
            start_t: None,
            reselect_features: false,
            frozen_models: false,
            fit: None,
            seed: 42,
            threads: None,
            output_dir: PathBuf::from("featmix-out"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>, CliError> {
        self.models
            .iter()
            .map(|m| m.parse().map_err(|e| CliError::Config(format!("models: {e}"))))
            .collect()
    }

    pub fn train_mode(&self) -> Result<Mode, CliError> {
        self.mode.parse().map_err(|e| CliError::Config(format!("mode: {e}")))
    }

    pub fn mode_list(&self) -> Result<Vec<Mode>, CliError> {
        if self.modes.is_empty() {
            return Err(CliError::Config("modes: at least one mode is required".into()));
        }
        self.modes
            .iter()
            .map(|m| m.parse().map_err(|e| CliError::Config(format!("modes: {e}"))))
            .collect()
    }

    pub fn catalog(&self) -> Result<FeatureCatalog, CliError> {
        if self.features.is_empty() {
            Ok(FeatureCatalog::full())
        } else {
            FeatureCatalog::from_names(&self.features).map_err(|e| CliError::Config(format!("features: {e}")))
        }
    }

    /// The pipeline configuration for a given model pool, validated.
    pub fn pipeline(&self, models: Vec<ModelKind>) -> Result<PipelineConfig, CliError> {
        let spec = WindowSpec {
            min_length: self.min_length,
            feature_window: self.feature_window,
            model_window: self.model_window,
        };
        let prior = PriorConfig::new(self.sigma2).map_err(|e| CliError::Config(format!("sigma2: {e}")))?;
        let cfg = PipelineConfig {
            models,
            model_options: ModelOptions {
                sd_floor: self.sd_floor,
                ar_max_order: self.ar_max_order,
            },
            spec,
            prior,
            catalog: self.catalog()?,
            feature_count: self.k,
            relief: ReliefOptions {
                k_neighbors: self.relief_neighbors,
                sample_count: self.relief_samples.map_or(SampleCount::All, SampleCount::Count),
                seed: self.seed,
            },
            inference: InferenceConfig {
                max_iterations: self.max_iterations,
                gradient_tolerance: self.gradient_tolerance,
                restarts: self.restarts,
                draws: self.draws,
                burn_in: self.burn_in,
                seed: self.seed,
            },
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.series.is_empty() {
            return Err(CliError::Config("series: no input files given".into()));
        }
        if self.period == 0 {
            return Err(CliError::Config("period: must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(CliError::Config("horizon: must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        if self.relief_neighbors == 0 {
            return Err(CliError::Config("relief_neighbors: must be at least 1".into()));
        }
        self.train_mode()?;
        self.mode_list()?;
        self.pipeline(self.model_kinds()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let err = toml::from_str::<RunConfig>("serie = []").unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn parses_windows_and_defaults() {
        let cfg: RunConfig = toml::from_str("feature_window = 20\nmodel_window = \"all\"\nk = 3").unwrap();
        assert_eq!(cfg.feature_window, Window::Last(20));
        assert_eq!(cfg.k, Some(3));
        assert_eq!(cfg.horizon, 18);
    }

    #[test]
    fn k_larger_than_catalog_names_the_field() {
        let cfg = RunConfig {
            series: vec!["x.csv".into()],
            features: vec!["x_acf1".into(), "trend".into()],
            k: Some(3),
            ..RunConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("k:"), "{msg}");
    }
}
