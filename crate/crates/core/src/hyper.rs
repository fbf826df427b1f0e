//! Updates of the graph, its density and the weight/rate parameters given the
//! hidden states.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{param_err, Result};
use crate::prior::{series_log_prior, GraphParams, HiddenStateMatrix};

/// Upper end of the support of the edge density `ρ`.
pub const RHO_MAX: f64 = 0.2;

/// Random-walk Metropolis settings for `(W, q)` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MhConfig {
    pub sd_w: f64,
    pub sd_q: f64,
    pub inner_thin: usize,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            sd_w: 0.5,
            sd_q: 0.05,
            inner_thin: 15,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_w > 0.0 && self.sd_q > 0.0) || self.inner_thin < 1 {
            return param_err("mh.sd_w and mh.sd_q must be positive and mh.inner_thin at least 1");
        }
        Ok(())
    }
}

/// Accepted and proposed Metropolis moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptStats {
    pub accepted: u64,
    pub proposed: u64,
}

impl AcceptStats {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    pub fn merge(&mut self, other: AcceptStats) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Log masses of `(A_ij, A_ji) = (1,0), (0,1), (0,0)` given the paths.
pub fn edge_pair_log_masses(i: usize, j: usize, x: &HiddenStateMatrix, g: &mut GraphParams) -> [f64; 3] {
    let saved = (g.adjacency[i][j], g.adjacency[j][i]);
    let half = (g.rho / 2.0).ln();
    let configs = [(true, false, half), (false, true, half), (false, false, (-g.rho).ln_1p())];
    let masses = configs.map(|(a, b, prior)| {
        g.adjacency[i][j] = a;
        g.adjacency[j][i] = b;
        prior + series_log_prior(i, x, g) + series_log_prior(j, x, g)
    });
    g.adjacency[i][j] = saved.0;
    g.adjacency[j][i] = saved.1;
    masses
}

/// Gibbs draw of the pair `(A_ij, A_ji)`; writes it into `g` and returns it.
pub fn sample_edge_pair<R: Rng + ?Sized>(
    i: usize,
    j: usize,
    x: &HiddenStateMatrix,
    g: &mut GraphParams,
    rng: &mut R,
) -> (bool, bool) {
    debug_assert!(i < j);
    let masses = edge_pair_log_masses(i, j, x, g);
    let pick = crate::numeric::pick_log(&masses, rng.random::<f64>());
    let pair = [(true, false), (false, true), (false, false)][pick];
    g.adjacency[i][j] = pair.0;
    g.adjacency[j][i] = pair.1;
    pair
}

/// Number of connected and empty unordered pairs.
pub fn pair_counts(adjacency: &[Vec<bool>]) -> (usize, usize) {
    let d = adjacency.len();
    let mut linked = 0;
    for i in 0..d {
        for j in i + 1..d {
            if adjacency[i][j] || adjacency[j][i] {
                linked += 1;
            }
        }
    }
    (linked, d * d.saturating_sub(1) / 2 - linked)
}

/// Inverse of the regularized incomplete beta function on `(0, upper)`.
fn beta_quantile(target: f64, a: f64, b: f64, upper: f64) -> f64 {
    let ln_norm = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0, upper);
    let mut x = 0.5 * upper;
    for _ in 0..100 {
        let f = beta_reg(a, b, x) - target;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm).exp();
        let newton = x - f / dens;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Draws `ρ ~ Beta(1 + n₁, 1 + n₂)` truncated to `(0, 0.2)` by inverting the
/// truncated CDF.
pub fn sample_rho<R: Rng + ?Sized>(adjacency: &[Vec<bool>], rng: &mut R) -> f64 {
    let (n1, n2) = pair_counts(adjacency);
    let (a, b) = (1.0 + n1 as f64, 1.0 + n2 as f64);
    let mass = beta_reg(a, b, RHO_MAX);
    let u = mass * rng.random::<f64>();
    beta_quantile(u, a, b, RHO_MAX).clamp(f64::MIN_POSITIVE, RHO_MAX * (1.0 - f64::EPSILON))
}

fn weight_log_target(weight: f64, rate: f64, path_log_prior: f64) -> f64 {
    if weight > 0.0 && rate > 0.0 && rate < 1.0 {
        // Ga(1, 1) weight prior, uniform rate prior
        path_log_prior - weight
    } else {
        f64::NEG_INFINITY
    }
}

/// Joint random-walk Metropolis on `(W_ij, q_ij)`, or on `(W0_j, q0_j)` when
/// `source` is `None`.
pub fn mh_update_weight_rate<R: Rng + ?Sized>(
    source: Option<usize>,
    j: usize,
    x: &HiddenStateMatrix,
    g: &mut GraphParams,
    cfg: &MhConfig,
    rng: &mut R,
) -> AcceptStats {
    // an absent edge leaves the path prior untouched
    let affects_path = source.is_none_or(|i| g.adjacency[i][j]);
    let get = |g: &GraphParams| match source {
        None => (g.w0[j], g.q0[j]),
        Some(i) => (g.w[i][j], g.q[i][j]),
    };
    let set = |g: &mut GraphParams, w: f64, q: f64| match source {
        None => {
            g.w0[j] = w;
            g.q0[j] = q;
        }
        Some(i) => {
            g.w[i][j] = w;
            g.q[i][j] = q;
        }
    };
    let path = |g: &GraphParams| if affects_path { series_log_prior(j, x, g) } else { 0.0 };

    let mut stats = AcceptStats::default();
    let (mut w, mut q) = get(g);
    let mut current = weight_log_target(w, q, path(g));
    for _ in 0..cfg.inner_thin {
        let zw: f64 = StandardNormal.sample(rng);
        let zq: f64 = StandardNormal.sample(rng);
        let (w_new, q_new) = (w + cfg.sd_w * zw, q + cfg.sd_q * zq);
        stats.proposed += 1;
        if !(w_new > 0.0 && q_new > 0.0 && q_new < 1.0) {
            continue;
        }
        set(g, w_new, q_new);
        let proposal = weight_log_target(w_new, q_new, path(g));
        if (proposal - current).min(0.0) >= rng.random::<f64>().ln() {
            w = w_new;
            q = q_new;
            current = proposal;
            stats.accepted += 1;
        } else {
            set(g, w, q);
        }
    }
    stats
}

/// Random-walk Metropolis on the background rate `q0_j` alone, for the
/// empty-graph model.
pub fn mh_update_rate_only<R: Rng + ?Sized>(
    j: usize,
    x: &HiddenStateMatrix,
    g: &mut GraphParams,
    cfg: &MhConfig,
    rng: &mut R,
) -> AcceptStats {
    let mut stats = AcceptStats::default();
    let mut current = series_log_prior(j, x, g);
    let mut q = g.q0[j];
    for _ in 0..cfg.inner_thin {
        let z: f64 = StandardNormal.sample(rng);
        let q_new = q + cfg.sd_q * z;
        stats.proposed += 1;
        if !(q_new > 0.0 && q_new < 1.0) {
            continue;
        }
        g.q0[j] = q_new;
        let proposal = series_log_prior(j, x, g);
        if (proposal - current).min(0.0) >= rng.random::<f64>().ln() {
            q = q_new;
            current = proposal;
            stats.accepted += 1;
        } else {
            g.q0[j] = q;
        }
    }
    stats
}
