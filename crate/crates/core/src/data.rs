//! Raw and processed multivariate series containers.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, param_err, Result};

/// Multivariate series as read from disk, before preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeriesSet {
    pub series_labels: Vec<String>,
    /// One row per series, all of identical length.
    pub values: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
}

impl RawSeriesSet {
    pub fn new(series_labels: Vec<String>, values: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return param_err(format!("sample rate must be positive, got {sample_rate_hz}"));
        }
        if series_labels.len() != values.len() {
            return data_err(format!(
                "{} labels for {} series",
                series_labels.len(),
                values.len()
            ));
        }
        if values.is_empty() {
            return data_err("no series");
        }
        let len = values[0].len();
        if len < 2 {
            return data_err(format!("series length {len} is below the minimum of 2"));
        }
        if let Some(row) = values.iter().position(|r| r.len() != len) {
            return data_err(format!(
                "series {row} has length {} but series 0 has length {len}",
                values[row].len()
            ));
        }
        let mut seen = HashSet::new();
        for label in &series_labels {
            if !seen.insert(label.as_str()) {
                return data_err(format!("duplicate series label {label:?}"));
            }
        }
        Ok(Self {
            series_labels,
            values,
            sample_rate_hz,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() || self.values[0].is_empty()
    }
}

/// The `d × T` data matrix consumed by the samplers.
///
/// Time is 1-based in every accessor of this crate: `value(j, t)` is the
/// observation of series `j` at time `t ∈ 1..=T`. Indices `t ≤ 0` address the
/// pre-sample lag context, `value(j, 0)` being the most recent pre-sample value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    y: Vec<Vec<f64>>,
    lag_context: Vec<Vec<f64>>,
}

impl ObservationMatrix {
    /// Builds a matrix with an all-zero lag context of depth `lags`.
    pub fn new(y: Vec<Vec<f64>>, lags: usize) -> Result<Self> {
        let d = y.len();
        Self::with_lag_context(y, vec![vec![0.0; lags]; d])
    }

    /// `lag_context[j][m]` is the value of series `j` at time `-m`.
    pub fn with_lag_context(y: Vec<Vec<f64>>, lag_context: Vec<Vec<f64>>) -> Result<Self> {
        if y.is_empty() {
            return data_err("observation matrix has no series");
        }
        let len = y[0].len();
        if len == 0 {
            return data_err("observation matrix has no time points");
        }
        for (j, row) in y.iter().enumerate() {
            if row.len() != len {
                return data_err(format!("series {j} has length {} instead of {len}", row.len()));
            }
            if let Some(t) = row.iter().position(|v| !v.is_finite()) {
                return data_err(format!("non-finite value in series {j} at time {}", t + 1));
            }
        }
        if lag_context.len() != y.len() {
            return data_err("lag context must have one row per series");
        }
        let depth = lag_context[0].len();
        if lag_context.iter().any(|r| r.len() != depth || r.iter().any(|v| !v.is_finite())) {
            return data_err("lag context rows must be finite and of equal depth");
        }
        Ok(Self { y, lag_context })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.y[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.y[0].is_empty()
    }

    pub fn lag_depth(&self) -> usize {
        self.lag_context[0].len()
    }

    /// Observation of series `j` at (1-based, possibly non-positive) time `t`.
    /// Pre-sample times beyond the stored context read as zero.
    pub fn value(&self, j: usize, t: isize) -> f64 {
        if t >= 1 {
            self.y[j][(t - 1) as usize]
        } else {
            self.lag_context[j].get((-t) as usize).copied().unwrap_or(0.0)
        }
    }

    /// Row `j`, indexed from time 1.
    pub fn series(&self, j: usize) -> &[f64] {
        &self.y[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn lag_context(&self) -> &[Vec<f64>] {
        &self.lag_context
    }

    /// Copy restricted to times `1..=len`.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return param_err(format!("prefix length {len} outside 1..={}", self.len()));
        }
        Ok(Self {
            y: self.y.iter().map(|r| r[..len].to_vec()).collect(),
            lag_context: self.lag_context.clone(),
        })
    }
}
