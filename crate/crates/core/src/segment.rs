//! Conjugate marginal segment densities.
//!
//! Two segment models are supported:
//!
//! * an AR(L) model with normal-inverse-gamma prior on `(φ, σ²)`:
//!   `φ_l | σ² ~ N(0, δ_l σ²)`, `σ² ~ IG(α, β)`;
//! * a Gaussian mean model with known variance: `y_k | θ ~ N(θ, σ²)`,
//!   `θ ~ N(0, γ²)`.
//!
//! A segment `s:t` holds observations `y_{s+1}, …, y_t`. Densities are in log
//! space and the empty segment has log density 0, so the predictive ratio
//! `f(y_{x:t}) / f(y_{x:t-1})` telescopes over a segment.
//!
//! [`ar_log_marginal`] and [`gauss_mean_log_marginal`] evaluate one segment
//! directly. [`SegmentModel`] precomputes prefix sums of the sufficient
//! statistics so every segment costs `O(L³)` regardless of its length.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::ObservationMatrix;
use crate::error::{param_err, NetcpError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Normal-inverse-gamma hyperparameters of the AR segment model. The lag
/// order is `delta.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModelHyper {
    pub alpha: f64,
    pub beta: f64,
    pub delta: Vec<f64>,
}

impl ArModelHyper {
    pub fn new(alpha: f64, beta: f64, delta: Vec<f64>) -> Result<Self> {
        let h = Self { alpha, beta, delta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return param_err(format!("AR alpha and beta must be positive, got {} and {}", self.alpha, self.beta));
        }
        if self.delta.is_empty() {
            return param_err("AR model needs at least one lag");
        }
        if self.delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return param_err("AR prior scales delta must be positive");
        }
        Ok(())
    }

    pub fn lags(&self) -> usize {
        self.delta.len()
    }
}

/// Known noise variance and prior mean variance of the Gaussian mean model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussMeanHyper {
    pub sigma2: f64,
    pub gamma2: f64,
}

impl GaussMeanHyper {
    pub fn new(sigma2: f64, gamma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && gamma2 > 0.0 && sigma2.is_finite() && gamma2.is_finite()) {
            return param_err(format!("sigma2 and gamma2 must be positive, got {sigma2} and {gamma2}"));
        }
        Ok(Self { sigma2, gamma2 })
    }
}

/// Per-series segment model selection, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentSpec {
    Ar {
        alpha: f64,
        beta: f64,
        /// One scale per lag, or a single scale shared by all `L` lags.
        delta: Vec<f64>,
        #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
        lags: Option<usize>,
    },
    GaussMean {
        sigma2: f64,
        gamma2: f64,
    },
    /// Every segment has density 1; the posterior equals the prior.
    Constant,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self::Ar {
            alpha: 1.0,
            beta: 1.0,
            delta: vec![1.0],
            lags: Some(1),
        }
    }
}

impl SegmentSpec {
    pub fn gauss_mean(sigma2: f64, gamma2: f64) -> Self {
        Self::GaussMean { sigma2, gamma2 }
    }

    pub fn ar_hyper(&self) -> Result<Option<ArModelHyper>> {
        match self {
            Self::Ar {
                alpha,
                beta,
                delta,
                lags,
            } => {
                let delta = match (lags, delta.len()) {
                    (Some(l), 1) => vec![delta[0]; *l],
                    (Some(l), n) if *l != n => {
                        return param_err(format!("L = {l} but {n} delta values were given"))
                    }
                    _ => delta.clone(),
                };
                ArModelHyper::new(*alpha, *beta, delta).map(Some)
            }
            _ => Ok(None),
        }
    }
}

/// Direct evaluation of `log f_j(y_{j, s:t})` under the AR model.
///
/// Rows of the design matrix are `(y_{k-1}, …, y_{k-L})` for `k = s+1..=t`;
/// times before 1 read from the matrix's lag context.
pub fn ar_log_marginal(y: &ObservationMatrix, j: usize, s: usize, t: usize, h: &ArModelHyper) -> Result<f64> {
    if !(s < t && t <= y.len()) {
        return Err(NetcpError::Contract(format!("segment {s}:{t} outside 0..={}", y.len())));
    }
    let n = t - s;
    let lags = h.lags();
    let design = DMatrix::from_fn(n, lags, |r, c| y.value(j, (s + r) as isize - c as isize));
    let obs = DVector::from_fn(n, |r, _| y.value(j, (s + r + 1) as isize));
    let mut precision = design.transpose() * &design;
    for l in 0..lags {
        precision[(l, l)] += 1.0 / h.delta[l];
    }
    let chol = precision
        .cholesky()
        .ok_or_else(|| NetcpError::Numeric(format!("posterior precision not positive definite on {s}:{t}")))?;
    let e = design.transpose() * &obs;
    let quad = e.dot(&chol.solve(&e));
    let ln_det_precision = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ln_det_prior: f64 = h.delta.iter().map(|d| d.ln()).sum();
    let beta_post = h.beta + 0.5 * (obs.norm_squared() - quad);
    if !(beta_post > 0.0) {
        return Err(NetcpError::Numeric(format!("updated rate {beta_post} is not positive on {s}:{t}")));
    }
    let alpha_post = h.alpha + n as f64 / 2.0;
    Ok(-(n as f64) / 2.0 * LN_2PI - 0.5 * (ln_det_precision + ln_det_prior) + h.alpha * h.beta.ln()
        - ln_gamma(h.alpha)
        + ln_gamma(alpha_post)
        - alpha_post * beta_post.ln())
}

/// Log marginal density of a segment under the Gaussian mean model.
pub fn gauss_mean_log_marginal(y: &[f64], h: &GaussMeanHyper) -> Result<f64> {
    if y.is_empty() {
        return Err(NetcpError::Contract("segment must hold at least one value".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(NetcpError::Data("non-finite value in segment".into()));
    }
    let n = y.len() as f64;
    let sum: f64 = y.iter().sum();
    let sum_sq: f64 = y.iter().map(|v| v * v).sum();
    Ok(gauss_from_stats(n, sum, sum_sq, (n * h.gamma2 + h.sigma2).ln(), h))
}

#[inline]
fn gauss_from_stats(n: f64, sum: f64, sum_sq: f64, ln_scale: f64, h: &GaussMeanHyper) -> f64 {
    let scale = n * h.gamma2 + h.sigma2;
    -0.5 * n * (LN_2PI + h.sigma2.ln()) + 0.5 * (h.sigma2.ln() - ln_scale) - sum_sq / (2.0 * h.sigma2)
        + h.gamma2 * sum * sum / (2.0 * h.sigma2 * scale)
}

#[derive(Debug, Clone)]
struct ArPrefix {
    hyper: ArModelHyper,
    /// `cum_hh[k]`, flattened `L × L`, sums `h_i h_iᵀ` over `i ≤ k`.
    cum_hh: Vec<f64>,
    cum_hy: Vec<f64>,
    cum_yy: Vec<f64>,
    ln_gamma_post: Vec<f64>,
    constant: f64,
}

impl ArPrefix {
    fn new(y: &ObservationMatrix, j: usize, hyper: ArModelHyper) -> Self {
        let len = y.len();
        let l = hyper.lags();
        let mut cum_hh = vec![0.0; (len + 1) * l * l];
        let mut cum_hy = vec![0.0; (len + 1) * l];
        let mut cum_yy = vec![0.0; len + 1];
        let mut row = vec![0.0; l];
        for k in 1..=len {
            let yk = y.value(j, k as isize);
            for (c, r) in row.iter_mut().enumerate() {
                *r = y.value(j, k as isize - 1 - c as isize);
            }
            for a in 0..l {
                for b in 0..l {
                    cum_hh[k * l * l + a * l + b] = cum_hh[(k - 1) * l * l + a * l + b] + row[a] * row[b];
                }
                cum_hy[k * l + a] = cum_hy[(k - 1) * l + a] + row[a] * yk;
            }
            cum_yy[k] = cum_yy[k - 1] + yk * yk;
        }
        let ln_gamma_post = (0..=len).map(|n| ln_gamma(hyper.alpha + n as f64 / 2.0)).collect();
        let ln_det_prior: f64 = hyper.delta.iter().map(|d| d.ln()).sum();
        let constant = hyper.alpha * hyper.beta.ln() - ln_gamma(hyper.alpha) - 0.5 * ln_det_prior;
        Self {
            hyper,
            cum_hh,
            cum_hy,
            cum_yy,
            ln_gamma_post,
            constant,
        }
    }

    fn log_marginal(&self, s: usize, t: usize) -> Result<f64> {
        let l = self.hyper.lags();
        let n = t - s;
        let yy = self.cum_yy[t] - self.cum_yy[s];
        let (ln_det, quad) = if l == 1 {
            let m = self.cum_hh[t] - self.cum_hh[s] + 1.0 / self.hyper.delta[0];
            let e = self.cum_hy[t] - self.cum_hy[s];
            (m.ln(), e * e / m)
        } else {
            let mut m = DMatrix::from_fn(l, l, |a, b| {
                self.cum_hh[t * l * l + a * l + b] - self.cum_hh[s * l * l + a * l + b]
            });
            for a in 0..l {
                m[(a, a)] += 1.0 / self.hyper.delta[a];
            }
            let e = DVector::from_fn(l, |a, _| self.cum_hy[t * l + a] - self.cum_hy[s * l + a]);
            let chol = m
                .cholesky()
                .ok_or_else(|| NetcpError::Numeric(format!("posterior precision not positive definite on {s}:{t}")))?;
            let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            (ln_det, e.dot(&chol.solve(&e)))
        };
        let beta_post = self.hyper.beta + 0.5 * (yy - quad);
        if !(beta_post > 0.0) {
            return Err(NetcpError::Numeric(format!("updated rate {beta_post} is not positive on {s}:{t}")));
        }
        let alpha_post = self.hyper.alpha + n as f64 / 2.0;
        Ok(-(n as f64) / 2.0 * LN_2PI - 0.5 * ln_det + self.constant + self.ln_gamma_post[n]
            - alpha_post * beta_post.ln())
    }
}

#[derive(Debug, Clone)]
struct GaussPrefix {
    hyper: GaussMeanHyper,
    cum: Vec<f64>,
    cum_sq: Vec<f64>,
    ln_scale: Vec<f64>,
}

impl GaussPrefix {
    fn new(y: &[f64], hyper: GaussMeanHyper) -> Self {
        let mut cum = vec![0.0; y.len() + 1];
        let mut cum_sq = vec![0.0; y.len() + 1];
        for (k, v) in y.iter().enumerate() {
            cum[k + 1] = cum[k] + v;
            cum_sq[k + 1] = cum_sq[k] + v * v;
        }
        let ln_scale = (0..=y.len()).map(|n| (n as f64 * hyper.gamma2 + hyper.sigma2).ln()).collect();
        Self {
            hyper,
            cum,
            cum_sq,
            ln_scale,
        }
    }

    fn log_marginal(&self, s: usize, t: usize) -> f64 {
        let n = t - s;
        gauss_from_stats(
            n as f64,
            self.cum[t] - self.cum[s],
            self.cum_sq[t] - self.cum_sq[s],
            self.ln_scale[n],
            &self.hyper,
        )
    }
}

#[derive(Debug, Clone)]
enum SeriesModel {
    Ar(ArPrefix),
    GaussMean(GaussPrefix),
    Constant,
}

/// Precomputed segment densities for every series of one data set.
#[derive(Debug, Clone)]
pub struct SegmentModel {
    series: Vec<SeriesModel>,
    len: usize,
}

impl SegmentModel {
    /// One spec per series, or a single spec applied to every series.
    pub fn new(y: &ObservationMatrix, specs: &[SegmentSpec]) -> Result<Self> {
        let d = y.dim();
        if specs.len() != 1 && specs.len() != d {
            return param_err(format!("{} segment specs for {d} series", specs.len()));
        }
        let mut series = Vec::with_capacity(d);
        for j in 0..d {
            let spec = if specs.len() == 1 { &specs[0] } else { &specs[j] };
            let model = match spec {
                SegmentSpec::Ar { .. } => {
                    let hyper = spec.ar_hyper()?.expect("AR spec");
                    SeriesModel::Ar(ArPrefix::new(y, j, hyper))
                }
                SegmentSpec::GaussMean { sigma2, gamma2 } => {
                    SeriesModel::GaussMean(GaussPrefix::new(y.series(j), GaussMeanHyper::new(*sigma2, *gamma2)?))
                }
                SegmentSpec::Constant => SeriesModel::Constant,
            };
            series.push(model);
        }
        Ok(Self { series, len: y.len() })
    }

    pub fn dim(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `log f_j(y_{j, s:t})`, with the empty segment (`s == t`) at 0.
    #[inline]
    pub fn log_marginal(&self, j: usize, s: usize, t: usize) -> Result<f64> {
        debug_assert!(s <= t && t <= self.len);
        if s == t {
            return Ok(0.0);
        }
        match &self.series[j] {
            SeriesModel::Ar(m) => m.log_marginal(s, t),
            SeriesModel::GaussMean(m) => Ok(m.log_marginal(s, t)),
            SeriesModel::Constant => Ok(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CacheEntry {
    value: f64,
    stamp: u64,
}

/// Memo of segment log densities keyed by `(series, start, end)`, bounded by
/// an entry budget with least-recently-used eviction.
#[derive(Debug, Clone)]
pub struct SegmentDensityCache {
    map: HashMap<(u32, u32, u32), CacheEntry>,
    budget: usize,
    clock: u64,
    hits: u64,
    misses: u64,
}

impl SegmentDensityCache {
    pub fn new(budget: usize) -> Self {
        Self {
            map: HashMap::new(),
            budget: budget.max(1),
            clock: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get_or_compute(&mut self, key: (usize, usize, usize), compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        self.clock += 1;
        let k = (key.0 as u32, key.1 as u32, key.2 as u32);
        if let Some(e) = self.map.get_mut(&k) {
            e.stamp = self.clock;
            self.hits += 1;
            return Ok(e.value);
        }
        self.misses += 1;
        let value = compute()?;
        if self.map.len() >= self.budget {
            self.evict();
        }
        self.map.insert(
            k,
            CacheEntry {
                value,
                stamp: self.clock,
            },
        );
        Ok(value)
    }

    /// Drops the least recently used quarter of the budget.
    fn evict(&mut self) {
        let drop = (self.budget / 4).max(1).min(self.map.len());
        let mut stamps: Vec<u64> = self.map.values().map(|e| e.stamp).collect();
        let (_, cutoff, _) = stamps.select_nth_unstable(drop - 1);
        let cutoff = *cutoff;
        self.map.retain(|_, e| e.stamp > cutoff);
    }
}

/// Segment densities with an optional cache in front of the model.
#[derive(Debug, Clone)]
pub struct SegmentDensities<'a> {
    model: &'a SegmentModel,
    cache: Option<SegmentDensityCache>,
}

impl<'a> SegmentDensities<'a> {
    /// `cache_budget == 0` disables caching.
    pub fn new(model: &'a SegmentModel, cache_budget: usize) -> Self {
        Self {
            model,
            cache: (cache_budget > 0).then(|| SegmentDensityCache::new(cache_budget)),
        }
    }

    pub fn model(&self) -> &'a SegmentModel {
        self.model
    }

    pub fn cache(&self) -> Option<&SegmentDensityCache> {
        self.cache.as_ref()
    }

    #[inline]
    pub fn log_marginal(&mut self, j: usize, s: usize, t: usize) -> Result<f64> {
        match &mut self.cache {
            None => self.model.log_marginal(j, s, t),
            Some(c) if s < t => {
                let model = self.model;
                c.get_or_compute((j, s, t), || model.log_marginal(j, s, t))
            }
            Some(_) => Ok(0.0),
        }
    }
}

/// `log f_j(y_t | x, y_{1:t-1}) = log f_j(y_{x:t}) - log f_j(y_{x:t-1})`.
pub fn predictive_log_like(j: usize, x: usize, t: usize, dens: &mut SegmentDensities<'_>) -> Result<f64> {
    if x >= t {
        return Err(NetcpError::Contract(format!("state {x} must precede time {t}")));
    }
    Ok(dens.log_marginal(j, x, t)? - dens.log_marginal(j, x, t - 1)?)
}
