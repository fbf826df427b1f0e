//! Fixed-order preprocessing: bandpass, downsample, difference, standardize.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ObservationMatrix, RawSeriesSet};
use crate::error::{data_err, param_err, NetcpError, Result};
use crate::filter::BandpassFilter;

/// Butterworth band given as `LO:HI:ORDER` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    4
}

impl FromStr for BandSpec {
    type Err = NetcpError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || NetcpError::Parameter(format!("expected LO:HI[:ORDER], got {s:?}"));
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let low_hz = parts[0].trim().parse().map_err(|_| bad())?;
        let high_hz = parts[1].trim().parse().map_err(|_| bad())?;
        let order = match parts.get(2) {
            Some(o) => o.trim().parse().map_err(|_| bad())?,
            None => default_order(),
        };
        Ok(Self {
            low_hz,
            high_hz,
            order,
        })
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.low_hz, self.high_hz, self.order)
    }
}

/// Which preprocessing stages to run. Stages always run in the order
/// bandpass → downsample → difference → standardize.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub bandpass: Option<BandSpec>,
    pub downsample: Option<usize>,
    pub difference: bool,
    pub standardize: bool,
}

impl PreprocessConfig {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Filtering is a single causal forward pass (no zero-phase smoothing),
    /// so change-point timing is never moved earlier than the data supports.
    pub const FILTER_MODE: &'static str = "causal-forward";
}

/// Keeps samples `0, k, 2k, …`.
pub fn downsample(x: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return param_err("downsample factor must be at least 1");
    }
    Ok(x.iter().step_by(k).copied().collect())
}

/// First differences; the output is one sample shorter.
pub fn difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Shifts to zero sample mean and scales to unit sample standard deviation
/// (denominator `n - 1`).
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return data_err("cannot standardize fewer than two samples");
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * (1.0 + mean.abs())) {
        return data_err("series has zero variance and cannot be standardized");
    }
    let scaled: Vec<f64> = centered.iter().map(|v| v / sd).collect();
    // one refinement pass pulls the moments to within rounding of (0, 1)
    let mean2 = scaled.iter().sum::<f64>() / n as f64;
    let sd2 = (scaled.iter().map(|v| (v - mean2) * (v - mean2)).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(scaled.iter().map(|v| (v - mean2) / sd2).collect())
}

/// Runs the configured stages on every series.
pub fn preprocess(raw: &RawSeriesSet, config: &PreprocessConfig) -> Result<ObservationMatrix> {
    let filter = config
        .bandpass
        .map(|b| BandpassFilter::butterworth(b.order, b.low_hz, b.high_hz, raw.sample_rate_hz))
        .transpose()?;
    if let Some(k) = config.downsample {
        if k < 1 {
            return param_err("downsample factor must be at least 1");
        }
    }

    let mut rows = Vec::with_capacity(raw.dim());
    for (j, series) in raw.values.iter().enumerate() {
        let mut x = match &filter {
            Some(f) => f.apply(series)?,
            None => series.clone(),
        };
        if let Some(k) = config.downsample {
            x = downsample(&x, k)?;
        }
        if config.difference {
            x = difference(&x);
        }
        if x.len() < 3 {
            return data_err(format!(
                "preprocessing leaves {} samples in series {j}; at least 3 are required",
                x.len()
            ));
        }
        if config.standardize {
            x = standardize(&x).map_err(|e| match e {
                NetcpError::Data(m) => NetcpError::Data(format!("series {:?}: {m}", raw.series_labels[j])),
                other => other,
            })?;
        }
        rows.push(x);
    }
    ObservationMatrix::new(rows, 0)
}
