//! Expanding/rolling history windows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Either the full history or the most recent `n` observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    All,
    Last(usize),
}

impl Window {
    /// The tail of `history` this window keeps.
    pub fn apply<'a>(&self, history: &'a [f64]) -> &'a [f64] {
        match *self {
            Window::All => history,
            Window::Last(n) => &history[history.len().saturating_sub(n)..],
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::All => f.write_str("all"),
            Window::Last(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Window::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Window::Last(n)),
            _ => Err(Error::InvalidArgument(format!(
                "window must be a positive integer or 'all', got '{s}'"
            ))),
        }
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Window::All => s.serialize_str("all"),
            Window::Last(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(0) => Err(serde::de::Error::custom("window must be positive")),
            Raw::N(n) => Ok(Window::Last(n as usize)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How much history is required, and how much of it features and models see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Minimum history before the first feature row / predictive density (`s`).
    pub min_length: usize,
    /// Sliding window for feature computation.
    pub feature_window: Window,
    /// Rolling estimation sample for the component models.
    pub model_window: Window,
}

impl WindowSpec {
    pub fn new(min_length: usize, feature_window: Window, model_window: Window) -> Result<Self> {
        let spec = Self {
            min_length,
            feature_window,
            model_window,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks that do not depend on the feature set.
    pub fn validate(&self) -> Result<()> {
        if self.min_length == 0 {
            return Err(Error::InvalidArgument("min_length must be positive".into()));
        }
        if let Window::Last(n) = self.feature_window {
            if n > self.min_length {
                return Err(Error::InvalidArgument(format!(
                    "feature_window ({n}) must not exceed min_length ({})",
                    self.min_length
                )));
            }
        }
        Ok(())
    }

    /// Length of the feature history for a raw history of length `n`.
    pub fn feature_len(&self, n: usize) -> usize {
        match self.feature_window {
            Window::All => n,
            Window::Last(w) => w.min(n),
        }
    }

    /// Length of the model estimation sample for a raw history of length `n`.
    pub fn model_len(&self, n: usize) -> usize {
        match self.model_window {
            Window::All => n,
            Window::Last(w) => w.min(n),
        }
    }
}

/// History available when forecasting target `t` (1-based).
#[derive(Debug, Clone, Copy)]
pub struct HistorySlice<'a> {
    /// 1-based index of the observation being forecast.
    pub target: usize,
    /// Observations `y_1 .. y_{t-1}`, truncated to the feature window.
    pub values: &'a [f64],
}

/// One slice per target `t = s+1 ..= T`, never including `y_t` itself.
pub fn history_slices<'a>(series: &'a TimeSeries, spec: &WindowSpec) -> Result<Vec<HistorySlice<'a>>> {
    let total = series.len();
    let s = spec.min_length;
    if total <= s {
        return Err(Error::InsufficientHistory {
            required: s,
            available: total,
        });
    }
    Ok(((s + 1)..=total)
        .map(|t| HistorySlice {
            target: t,
            values: spec.feature_window.apply(&series.values()[..t - 1]),
        })
        .collect())
}
