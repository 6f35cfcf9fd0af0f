//! Time-varying series features, best-model labels and ReliefF screening.

mod definitions;
mod relieff;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::DensityMatrix;
use crate::series::TimeSeries;
use crate::window::{history_slices, WindowSpec};

pub use relieff::{relieff_rank, select_top_k, RankedFeature, ReliefOptions, SampleCount};

/// Minimum `min_length` when twice-differenced features are in use.
pub const DIFF2_MIN_LENGTH: usize = 25;

/// The implemented feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Alpha,
    Beta,
    ArchAcf,
    ArchR2,
    CrossingPoints,
    Diff1xPacf5,
    Diff2Acf1,
    Diff2Acf10,
    Entropy,
    GarchAcf,
    GarchR2,
    Nonlinearity,
    Trend,
    UnitrootKpss,
    XAcf1,
}

impl Feature {
    pub const ALL: [Feature; 15] = [
        Feature::Alpha,
        Feature::Beta,
        Feature::ArchAcf,
        Feature::ArchR2,
        Feature::CrossingPoints,
        Feature::Diff1xPacf5,
        Feature::Diff2Acf1,
        Feature::Diff2Acf10,
        Feature::Entropy,
        Feature::GarchAcf,
        Feature::GarchR2,
        Feature::Nonlinearity,
        Feature::Trend,
        Feature::UnitrootKpss,
        Feature::XAcf1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Feature::Alpha => "alpha",
            Feature::Beta => "beta",
            Feature::ArchAcf => "arch_acf",
            Feature::ArchR2 => "arch_r2",
            Feature::CrossingPoints => "crossing_points",
            Feature::Diff1xPacf5 => "diff1x_pacf5",
            Feature::Diff2Acf1 => "diff2_acf1",
            Feature::Diff2Acf10 => "diff2_acf10",
            Feature::Entropy => "entropy",
            Feature::GarchAcf => "garch_acf",
            Feature::GarchR2 => "garch_r2",
            Feature::Nonlinearity => "nonlinearity",
            Feature::Trend => "trend",
            Feature::UnitrootKpss => "unitroot_kpss",
            Feature::XAcf1 => "x_acf1",
        }
    }

    /// Shortest history on which the feature is defined.
    pub fn min_length(&self) -> usize {
        match self {
            Feature::XAcf1 | Feature::UnitrootKpss => 3,
            Feature::CrossingPoints => 2,
            Feature::Entropy => 4,
            Feature::Diff2Acf1 | Feature::Trend => 5,
            Feature::Nonlinearity => 6,
            Feature::Diff1xPacf5 => 7,
            Feature::Alpha | Feature::Beta => 10,
            Feature::Diff2Acf10 | Feature::ArchAcf => 13,
            Feature::ArchR2 | Feature::GarchAcf | Feature::GarchR2 => 26,
        }
    }

    fn uses_second_differences(&self) -> bool {
        matches!(self, Feature::Diff2Acf1 | Feature::Diff2Acf10)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature '{s}'")))
    }
}

/// An ordered list of distinct features.
///
/// [`FeatureCatalog::new`] requires at least one feature; the intercept-only
/// pool (constant weights) uses [`FeatureCatalog::intercept_only`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    features: Vec<Feature>,
}

impl FeatureCatalog {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument("feature catalog is empty".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::InvalidArgument(format!("duplicate feature '{f}'")));
            }
        }
        Ok(Self { features })
    }

    /// All fifteen features in canonical order.
    pub fn full() -> Self {
        Self {
            features: Feature::ALL.to_vec(),
        }
    }

    pub fn intercept_only() -> Self {
        Self { features: Vec::new() }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| n.as_ref().parse()).collect::<Result<_>>()?)
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name().to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Longest per-feature minimum history.
    pub fn min_history(&self) -> usize {
        self.features.iter().map(Feature::min_length).max().unwrap_or(0)
    }

    /// Checks that every feature row of `spec` has enough history.
    pub fn validate_window(&self, spec: &WindowSpec) -> Result<()> {
        if self.features.iter().any(Feature::uses_second_differences) && spec.min_length < DIFF2_MIN_LENGTH {
            return Err(Error::InvalidArgument(format!(
                "min_length must be at least {DIFF2_MIN_LENGTH} with twice-differenced features"
            )));
        }
        let available = spec.feature_len(spec.min_length);
        let need = self.min_history();
        if available < need {
            return Err(Error::InvalidArgument(format!(
                "feature window provides {available} observations, catalog needs {need}"
            )));
        }
        Ok(())
    }
}

/// Raw feature values for one history slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// The history was constant; ACF-type features were set to 0 and entropy to 1.
    pub constant_series: bool,
}

/// Computes each catalog feature on `history`.
pub fn compute_features(history: &[f64], catalog: &FeatureCatalog) -> Result<FeatureVector> {
    let need = catalog.min_history();
    if history.len() < need {
        return Err(Error::InsufficientHistory {
            required: need - 1,
            available: history.len(),
        });
    }
    if let Some(i) = history.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let constant_series = history.iter().all(|&v| v == history[0]);
    let needs = |f: &[Feature]| catalog.features.iter().any(|x| f.contains(x));
    let ets = if needs(&[Feature::Alpha, Feature::Beta]) {
        definitions::ets_parameters(history)
    } else {
        (0.0, 0.0)
    };
    let arch = if needs(&[Feature::ArchAcf, Feature::ArchR2]) {
        definitions::arch_stats(history)
    } else {
        (0.0, 0.0)
    };
    let garch = if needs(&[Feature::GarchAcf, Feature::GarchR2]) {
        if constant_series {
            (0.0, 0.0)
        } else {
            definitions::garch_stats(history)
        }
    } else {
        (0.0, 0.0)
    };
    let values = catalog
        .features
        .iter()
        .map(|f| match f {
            Feature::Alpha => ets.0,
            Feature::Beta => ets.1,
            Feature::ArchAcf => arch.0,
            Feature::ArchR2 => arch.1,
            Feature::CrossingPoints => definitions::crossing_points(history),
            Feature::Diff1xPacf5 => definitions::diff1x_pacf5(history),
            Feature::Diff2Acf1 => definitions::diff2_acf1(history),
            Feature::Diff2Acf10 => definitions::diff2_acf10(history),
            Feature::Entropy => definitions::entropy(history),
            Feature::GarchAcf => garch.0,
            Feature::GarchR2 => garch.1,
            Feature::Nonlinearity => definitions::nonlinearity(history),
            Feature::Trend => definitions::trend(history),
            Feature::UnitrootKpss => definitions::unitroot_kpss(history),
            Feature::XAcf1 => definitions::x_acf1(history),
        })
        .collect();
    Ok(FeatureVector {
        values,
        constant_series,
    })
}

/// Feature rows indexed by forecast target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    targets: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, targets: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if targets.len() != rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} targets",
                rows.len(),
                targets.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != names.len()) {
            return Err(Error::DimensionMismatch(format!(
                "feature row {i} has {} values for {} names",
                r.len(),
                names.len()
            )));
        }
        Ok(Self { names, targets, rows })
    }

    /// Matrix with no feature columns (intercept-only pools).
    pub fn empty(targets: Vec<usize>) -> Self {
        let rows = vec![Vec::new(); targets.len()];
        Self {
            names: Vec::new(),
            targets,
            rows,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Columns by name, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidArgument(format!("feature '{n}' not in matrix")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            names: names.to_vec(),
            targets: self.targets.clone(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        })
    }

    /// Rows by position.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            rows: rows.iter().map(|&r| self.rows[r].clone()).collect(),
        }
    }

    /// Rows whose target lies in `[from, to)`.
    pub fn slice_targets(&self, from: usize, to: usize) -> Self {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&r| self.targets[r] >= from && self.targets[r] < to)
            .collect();
        self.select_rows(&idx)
    }
}

/// Raw (unstandardized) feature rows for targets `s+1 ..= T`.
pub fn compute_feature_matrix(series: &TimeSeries, spec: &WindowSpec, catalog: &FeatureCatalog) -> Result<FeatureMatrix> {
    let slices = history_slices(series, spec)?;
    let rows = slices
        .par_iter()
        .map(|h| {
            compute_features(h.values, catalog)
                .map(|v| v.values)
                .map_err(|e| Error::FeaturesAt {
                    t: h.target,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(catalog.names(), slices.iter().map(|h| h.target).collect(), rows)
}

/// Index of the model with the highest log density in each row; ties go to the lowest index.
pub fn label_best_model(density: &DensityMatrix) -> Vec<usize> {
    (0..density.n_rows())
        .map(|r| {
            let row = density.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
