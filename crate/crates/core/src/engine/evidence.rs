//! Log marginal likelihood by sequential one-step predictive densities.
//!
//! `log f(y) = Σ_t log f(y_t | y_{1:t-1})`. For each prefix a chain targets
//! the posterior given `y_{1:t-1}`; each draw contributes the predictive
//! density of `y_t` with `X_t` summed out over its two values:
//!
//! ```text
//! f(y_t | x_{t-1}, g) = Π_j [p_{j,t} f_j(y_t | t-1) + (1 - p_{j,t}) f_j(y_t | x_{j,t-1})]
//! ```
//!
//! The chain is carried from one prefix to the next by a single prior step,
//! followed by a short burn-in.

use serde::{Deserialize, Serialize};

use super::{Chain, RunConfig};
use crate::data::ObservationMatrix;
use crate::error::{param_err, NetcpError, Result};
use crate::numeric::log_sum_exp;
use crate::prior::change_prob;
use crate::segment::SegmentModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvidenceConfig {
    /// Sweeps per prefix, including burn-in.
    pub n_iters: usize,
    pub burn_in: usize,
    /// Upper bound on `Σ_t n_iters · t · d`.
    pub max_work: f64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            n_iters: 500,
            burn_in: 100,
            max_work: 2e10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub log_evidence: f64,
    /// `terms[t-1] = log f(y_t | y_{1:t-1})`.
    pub terms: Vec<f64>,
    /// Monte Carlo standard error of each term (batch means).
    pub std_errors: Vec<f64>,
    pub std_error: f64,
}

const BATCHES: usize = 20;

fn log_mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let log_mean = max + mean.ln();
    let batches = BATCHES.min(n);
    if batches < 2 {
        return (log_mean, 0.0);
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| scaled[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (log_mean, (var / batches as f64).sqrt() / mean)
}

/// Estimates `log f(y)` under the model in `cfg` with per-prefix schedules
/// from `ev`.
pub fn log_evidence(y: &ObservationMatrix, cfg: &RunConfig, ev: &EvidenceConfig) -> Result<EvidenceEstimate> {
    if ev.burn_in >= ev.n_iters {
        return param_err("evidence burn_in must be below n_iters");
    }
    let (d, len) = (y.dim(), y.len());
    let work: f64 = (1..len).map(|t| (ev.n_iters * t * d) as f64).sum();
    if work > ev.max_work {
        return Err(NetcpError::Resource(format!(
            "evidence schedule needs ~{work:.2e} state updates, limit {:.2e}",
            ev.max_work
        )));
    }
    let model = SegmentModel::new(y, &cfg.segment.specs())?;
    let mut terms = Vec::with_capacity(len);
    let mut std_errors = Vec::with_capacity(len);
    let mut first = 0.0;
    for j in 0..d {
        first += model.log_marginal(j, 0, 1)?;
    }
    terms.push(first);
    std_errors.push(0.0);

    if len > 1 {
        let mut chain = Chain::new(&model, cfg, 0, 1)?;
        let mut draws = Vec::with_capacity(ev.n_iters - ev.burn_in);
        for t in 2..=len {
            if t > 2 {
                chain.extend();
            }
            for _ in 0..ev.burn_in {
                chain.sweep()?;
            }
            draws.clear();
            for _ in ev.burn_in..ev.n_iters {
                chain.sweep()?;
                draws.push(predictive(&mut chain, &model, t)?);
            }
            let (term, se) = log_mean_and_se(&draws);
            terms.push(term);
            std_errors.push(se);
        }
    }
    Ok(EvidenceEstimate {
        log_evidence: terms.iter().sum(),
        std_error: std_errors.iter().map(|s| s * s).sum::<f64>().sqrt(),
        terms,
        std_errors,
    })
}

fn predictive(chain: &mut Chain<'_>, model: &SegmentModel, t: usize) -> Result<f64> {
    let prev = chain.states().column(t - 1);
    let mut total = 0.0;
    for (j, &s) in prev.iter().enumerate() {
        let p = change_prob(j, t, &prev, chain.params());
        let birth = model.log_marginal(j, t - 1, t)?;
        let cont = model.log_marginal(j, s, t)? - model.log_marginal(j, s, t - 1)?;
        total += log_sum_exp(&[p.ln() + birth, (-p).ln_1p() + cont]);
    }
    Ok(total)
}
