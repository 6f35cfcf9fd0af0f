use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_predict, ModelKind, ModelOptions, PredictiveDensity};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::window::WindowSpec;

/// One-step log predictive densities, one row per target index and one column per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    model_names: Vec<String>,
    targets: Vec<usize>,
    /// Row-major `(rows x models)` log densities.
    log_densities: Vec<f64>,
    /// Row-major predictive densities behind each cell, when built from models.
    components: Option<Vec<PredictiveDensity>>,
}

impl DensityMatrix {
    /// Wraps precomputed log densities (`rows[t][i]`).
    pub fn from_log_densities(model_names: Vec<String>, targets: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = model_names.len();
        if m == 0 {
            return Err(Error::InvalidArgument("density matrix needs at least one model".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let mut flat = Vec::with_capacity(rows.len() * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!("row {r} has {} cells, expected {m}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteScore);
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            model_names,
            targets,
            log_densities: flat,
            components: None,
        })
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    /// Log densities of all models at row `r`.
    pub fn row(&self, r: usize) -> &[f64] {
        let m = self.n_models();
        &self.log_densities[r * m..(r + 1) * m]
    }

    pub fn get(&self, r: usize, model: usize) -> f64 {
        self.log_densities[r * self.n_models() + model]
    }

    /// Predictive density behind cell `(r, model)`, if the matrix was built from models.
    pub fn component(&self, r: usize, model: usize) -> Option<PredictiveDensity> {
        self.components.as_ref().map(|c| c[r * self.n_models() + model])
    }

    /// Rows whose target index lies in `[from, to)`.
    pub fn slice_targets(&self, from: usize, to: usize) -> Self {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&r| self.targets[r] >= from && self.targets[r] < to)
            .collect();
        self.select_rows(&idx)
    }

    /// Subset of rows by position.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let m = self.n_models();
        Self {
            model_names: self.model_names.clone(),
            targets: rows.iter().map(|&r| self.targets[r]).collect(),
            log_densities: rows.iter().flat_map(|&r| self.row(r).to_vec()).collect(),
            components: self
                .components
                .as_ref()
                .map(|c| rows.iter().flat_map(|&r| c[r * m..(r + 1) * m].to_vec()).collect()),
        }
    }

    /// Subset of models by position, in the given order.
    pub fn select_models(&self, models: &[usize]) -> Self {
        let m = self.n_models();
        let pick = |v: &[f64]| -> Vec<f64> {
            (0..self.n_rows())
                .flat_map(|r| models.iter().map(move |&i| v[r * m + i]))
                .collect()
        };
        Self {
            model_names: models.iter().map(|&i| self.model_names[i].clone()).collect(),
            targets: self.targets.clone(),
            log_densities: pick(&self.log_densities),
            components: self.components.as_ref().map(|c| {
                (0..self.n_rows())
                    .flat_map(|r| models.iter().map(move |&i| c[r * m + i]))
                    .collect()
            }),
        }
    }

    /// Sum of one model's log densities over all rows (its log score).
    pub fn column_score(&self, model: usize) -> f64 {
        (0..self.n_rows()).map(|r| self.get(r, model)).sum()
    }
}

/// Evaluates every model on every history slice: cell `(t, i)` is the log density
/// of `y_t` under model `i` fit on `y_1 .. y_{t-1}` (truncated to the model window).
pub fn build_density_matrix(
    series: &TimeSeries,
    models: &[ModelKind],
    spec: &WindowSpec,
    opts: &ModelOptions,
) -> Result<DensityMatrix> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("model pool is empty".into()));
    }
    let s = spec.min_length;
    let total = series.len();
    if total <= s {
        return Err(Error::InsufficientHistory {
            required: s,
            available: total,
        });
    }
    for kind in models {
        let need = kind.min_length(opts);
        if need > s || need > spec.model_len(s) {
            return Err(Error::InvalidArgument(format!(
                "model {kind} needs {need} observations but the window provides {}",
                spec.model_len(s)
            )));
        }
    }
    let y = series.values();
    let rows: Vec<Vec<PredictiveDensity>> = ((s + 1)..=total)
        .into_par_iter()
        .map(|t| {
            let history = spec.model_window.apply(&y[..t - 1]);
            models
                .iter()
                .map(|&kind| {
                    fit_predict(kind, history, 1, opts)
                        .map(|f| f.densities[0])
                        .map_err(|e| Error::ModelAt {
                            t,
                            model: kind.name().to_string(),
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let m = models.len();
    let mut log_densities = Vec::with_capacity(rows.len() * m);
    for (r, row) in rows.iter().enumerate() {
        let t = s + 1 + r;
        for (i, d) in row.iter().enumerate() {
            let v = d.log_density(y[t - 1]);
            if !v.is_finite() {
                return Err(Error::ModelAt {
                    t,
                    model: models[i].name().to_string(),
                    source: Box::new(Error::NonFiniteScore),
                });
            }
            log_densities.push(v);
        }
    }
    Ok(DensityMatrix {
        model_names: models.iter().map(|k| k.name().to_string()).collect(),
        targets: ((s + 1)..=total).collect(),
        log_densities,
        components: Some(rows.into_iter().flatten().collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::window::Window;

    #[test]
    fn single_naive_cells() {
        let series = TimeSeries::from_values("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = WindowSpec::new(2, Window::All, Window::All).unwrap();
        let opts = ModelOptions::default();
        let dm = build_density_matrix(&series, &[ModelKind::Naive], &spec, &opts).unwrap();
        assert_eq!(dm.targets(), &[3, 4]);
        // t = 3: history [1, 2] -> one difference, sd undefined -> floor
        let c3 = dm.component(0, 0).unwrap();
        assert_eq!(c3.mean, 2.0);
        assert_eq!(c3.sd, opts.sd_floor);
        assert_eq!(dm.get(0, 0), stats::normal_log_pdf(3.0, 2.0, opts.sd_floor));
        // t = 4: history [1, 2, 3] -> diffs [1, 1], sd 0 -> floor
        assert_eq!(dm.component(1, 0).unwrap().mean, 3.0);
        assert_eq!(dm.get(1, 0), stats::normal_log_pdf(4.0, 3.0, opts.sd_floor));
    }

    #[test]
    fn shape_and_poisoning() {
        let y: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 * 0.3 + (i as f64 * 0.1)).collect();
        let series = TimeSeries::from_values("x", y.clone()).unwrap();
        let spec = WindowSpec::new(20, Window::All, Window::All).unwrap();
        let kinds = [ModelKind::Naive, ModelKind::RwDrift, ModelKind::EtsAan, ModelKind::Ar];
        let dm = build_density_matrix(&series, &kinds, &spec, &ModelOptions::default()).unwrap();
        assert_eq!((dm.n_rows(), dm.n_models()), (20, 4));

        // changing y_30 leaves rows t <= 30 untouched except the realized density at t = 30
        let mut poisoned = y.clone();
        poisoned[29] += 100.0;
        let series2 = TimeSeries::from_values("x", poisoned).unwrap();
        let dm2 = build_density_matrix(&series2, &kinds, &spec, &ModelOptions::default()).unwrap();
        for r in 0..dm.n_rows() {
            let t = dm.targets()[r];
            for i in 0..4 {
                if t <= 30 {
                    assert_eq!(dm.component(r, i), dm2.component(r, i), "t={t} i={i}");
                }
                if t < 30 {
                    assert_eq!(dm.get(r, i), dm2.get(r, i));
                }
            }
        }
        // column score is the column sum
        let s: f64 = (0..dm.n_rows()).map(|r| dm.get(r, 1)).sum();
        assert_eq!(dm.column_score(1), s);
    }

    #[test]
    fn rejects_model_longer_than_window() {
        let series = TimeSeries::from_values("x", (0..80).map(|i| (i as f64).sin()).collect()).unwrap();
        let spec = WindowSpec::new(30, Window::All, Window::All).unwrap();
        assert!(build_density_matrix(&series, &[ModelKind::Garch11], &spec, &ModelOptions::default()).is_err());
    }
}
