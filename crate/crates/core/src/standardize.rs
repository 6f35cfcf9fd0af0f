//! Column standardization with retained statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats;

/// Per-column mean and sample sd (`n - 1` divisor) of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns with zero spread; they standardize to 0.
    pub constant: Vec<bool>,
}

impl StandardizationStats {
    /// Stats for a matrix with no columns.
    pub fn empty() -> Self {
        Self {
            names: Vec::new(),
            mean: Vec::new(),
            sd: Vec::new(),
            constant: Vec::new(),
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} features, stats cover {}",
                row.len(),
                self.mean.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| if self.constant[j] { 0.0 } else { (v - self.mean[j]) / self.sd[j] })
            .collect())
    }

    /// Standardizes `matrix` with these stats (columns matched by position).
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.names() != self.names.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "matrix columns {:?} differ from stats columns {:?}",
                matrix.names(),
                self.names
            )));
        }
        let rows = matrix.rows().iter().map(|r| self.apply_row(r)).collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.names.clone(), matrix.targets().to_vec(), rows)
    }
}

/// Centers and scales every column to sample mean 0 and sd 1.
pub fn standardize(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, StandardizationStats)> {
    if matrix.n_rows() < 2 {
        return Err(Error::InsufficientHistory {
            required: 1,
            available: matrix.n_rows(),
        });
    }
    let p = matrix.n_features();
    let mut mean = Vec::with_capacity(p);
    let mut sd = Vec::with_capacity(p);
    let mut constant = Vec::with_capacity(p);
    for j in 0..p {
        let col = matrix.column(j);
        let m = stats::mean(&col);
        let s = stats::sd(&col);
        mean.push(m);
        sd.push(s);
        constant.push(!(s > 1e-12 * m.abs().max(1.0)));
    }
    let stats = StandardizationStats {
        names: matrix.names().to_vec(),
        mean,
        sd,
        constant,
    };
    let out = stats.apply(matrix)?;
    Ok((out, stats))
}
