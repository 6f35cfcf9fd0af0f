//! Feature-driven Bayesian combination of density forecasts.
//!
//! Component models produce one-step Gaussian predictive densities; their
//! mixture weights are a softmax of time-series features whose coefficients are
//! estimated at the posterior mode, optionally with Gibbs variable selection
//! over the features. Equal weights and constant optimal weights are provided
//! as benchmarks.

// `!(x > 0.0)` is used on purpose so that NaN fails the same checks as nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod eval;
pub mod features;
pub mod forecast;
pub mod inference;
pub mod models;
pub mod optim;
pub mod pool;
pub mod series;
pub mod standardize;
pub mod stats;
pub mod synthetic;
pub mod window;

pub use error::{Error, Result};
pub use features::{Feature, FeatureCatalog, FeatureMatrix};
pub use forecast::{
    forecast_h, recursive_oos_evaluate, train_pipeline, CombinationFit, ForecastResult, Mode, OosOptions,
    PipelineConfig,
};
pub use inference::{gibbs_select, map_estimate, InferenceConfig, PosteriorDraw};
pub use models::{DensityMatrix, ModelKind, ModelOptions, PredictiveDensity};
pub use pool::{CoefficientMatrix, PriorConfig, SelectionMatrix, WeightVector};
pub use series::TimeSeries;
pub use standardize::{standardize, StandardizationStats};
pub use window::{Window, WindowSpec};
