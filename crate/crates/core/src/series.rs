//! Univariate series container and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered, finite, univariate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    period: usize,
}

impl TimeSeries {
    /// Builds a series, rejecting empty input, non-finite values and a zero period.
    pub fn new(id: impl Into<String>, values: Vec<f64>, period: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if period == 0 {
            return Err(Error::InvalidArgument("period must be at least 1".into()));
        }
        Ok(Self {
            id: id.into(),
            values,
            period,
        })
    }

    /// Nonseasonal series with the given label.
    pub fn from_values(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, values, 1)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// New series holding the first `n` observations.
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(self.id.clone(), self.values[..n.min(self.len())].to_vec(), self.period)
    }
}

/// Options for [`load_series`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop rows whose cell does not parse as a finite number instead of failing.
    pub skip_invalid: bool,
    /// Seasonal period assigned to the loaded series.
    pub period: Option<usize>,
}

/// A series loaded from disk together with the number of rows that were dropped.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub series: TimeSeries,
    pub skipped: usize,
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn column_index(headers: &csv::StringRecord, column: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))
}

fn parse_cell(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads one value column of a headered CSV file in row order.
pub fn load_series(path: impl AsRef<Path>, column: &str, options: LoadOptions) -> Result<Loaded> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let idx = column_index(reader.headers()?, column)?;
    let mut values = Vec::new();
    let mut skipped = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record.get(idx).unwrap_or("");
        match parse_cell(raw) {
            Some(v) => values.push(v),
            None if options.skip_invalid => skipped += 1,
            None => {
                return Err(Error::NonNumeric {
                    row: i + 1,
                    value: raw.to_string(),
                })
            }
        }
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| column.to_string());
    let series = TimeSeries::new(id, values, options.period.unwrap_or(1))?;
    Ok(Loaded { series, skipped })
}

/// Reads a long-format CSV (`id_column`, `value_column`) into one series per id.
///
/// Series are returned sorted by id; within an id, row order is time order.
pub fn load_long(
    path: impl AsRef<Path>,
    id_column: &str,
    value_column: &str,
    options: LoadOptions,
) -> Result<Vec<Loaded>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let id_idx = column_index(&headers, id_column)?;
    let val_idx = column_index(&headers, value_column)?;
    let mut groups: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let id = record.get(id_idx).unwrap_or("").trim().to_string();
        let raw = record.get(val_idx).unwrap_or("");
        let entry = groups.entry(id).or_default();
        match parse_cell(raw) {
            Some(v) => entry.0.push(v),
            None if options.skip_invalid => entry.1 += 1,
            None => {
                return Err(Error::NonNumeric {
                    row: i + 1,
                    value: raw.to_string(),
                })
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptySeries);
    }
    groups
        .into_iter()
        .map(|(id, (values, skipped))| {
            Ok(Loaded {
                series: TimeSeries::new(id, values, options.period.unwrap_or(1))?,
                skipped,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_column_in_order() {
        let f = csv_file("v\n1\n2\n3\n");
        let loaded = load_series(f.path(), "v", LoadOptions::default()).unwrap();
        assert_eq!(loaded.series.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn header_only_is_empty() {
        let f = csv_file("v\n");
        let err = load_series(f.path(), "v", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptySeries));
    }

    #[test]
    fn non_numeric_reports_row() {
        let f = csv_file("v\n1\nx\n3\n");
        let err = load_series(f.path(), "v", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { row: 2, .. }), "{err:?}");

        let opts = LoadOptions {
            skip_invalid: true,
            ..Default::default()
        };
        let loaded = load_series(f.path(), "v", opts).unwrap();
        assert_eq!(loaded.series.values(), &[1.0, 3.0]);
        assert_eq!(loaded.skipped, 1);
    }

    #[test]
    fn missing_column_and_file() {
        let f = csv_file("a,b\n1,2\n");
        assert!(matches!(
            load_series(f.path(), "v", LoadOptions::default()),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            load_series("/nonexistent/x.csv", "v", LoadOptions::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn long_format_groups_by_id() {
        let f = csv_file("id,value\nb,1\na,5\nb,2\na,6\nb,3\n");
        let all = load_long(f.path(), "id", "value", LoadOptions::default()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].series.id(), "a");
        assert_eq!(all[0].series.values(), &[5.0, 6.0]);
        assert_eq!(all[1].series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(TimeSeries::from_values("x", vec![]).is_err());
        assert!(TimeSeries::from_values("x", vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new("x", vec![1.0], 0).is_err());
    }
}
