//! The latent-graph Markov prior over most-recent-change-point states.
//!
//! `X_{j,t}` is the time of the most recent change-point in series `j` strictly
//! before `t`. `X_{j,1} = 0` and for `t ≥ 2` the state either jumps to `t - 1`
//! (a change-point at `t - 1`) or copies `X_{j,t-1}`. The jump probability is a
//! normalized mixture of a background Bernoulli rate and geometric delay
//! kernels triggered by recent change-points in parent series:
//!
//! ```text
//! p_{j,t}(x) = (W0_j q0_j + Σ_i A_ij W_ij g_ij(t - x_i - 1) 1(x_i > 0)) / Z_j
//! Z_j        = W0_j + Σ_i A_ij W_ij
//! g_ij(u)    = q_ij (1 - q_ij)^(u - 1)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{data_err, param_err, Result};

/// Parameters of the change-point prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// `adjacency[i][j]`: series `i` leads series `j`.
    #[serde(rename = "A", serialize_with = "ser_adjacency", deserialize_with = "de_adjacency")]
    pub adjacency: Vec<Vec<bool>>,
    #[serde(rename = "W0")]
    pub w0: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub q0: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub rho: f64,
}

fn ser_adjacency<S: Serializer>(a: &[Vec<bool>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let ints: Vec<Vec<u8>> = a.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect();
    ints.serialize(s)
}

fn de_adjacency<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<bool>>, D::Error> {
    let ints: Vec<Vec<u8>> = Vec::deserialize(d)?;
    Ok(ints.into_iter().map(|r| r.into_iter().map(|v| v != 0).collect()).collect())
}

impl GraphParams {
    /// Empty graph, unit weights, all rates ½ and `ρ = 0.1`.
    pub fn prior_means(d: usize) -> Self {
        Self {
            adjacency: vec![vec![false; d]; d],
            w0: vec![1.0; d],
            w: vec![vec![1.0; d]; d],
            q0: vec![0.5; d],
            q: vec![vec![0.5; d]; d],
            rho: 0.1,
        }
    }

    /// Empty graph with background rate `q0` in every series.
    pub fn independent(d: usize, q0: f64) -> Self {
        Self {
            q0: vec![q0; d],
            ..Self::prior_means(d)
        }
    }

    /// Sets edge `from → to` with its weight and decay rate.
    pub fn with_edge(mut self, from: usize, to: usize, weight: f64, rate: f64) -> Self {
        self.adjacency[from][to] = true;
        self.w[from][to] = weight;
        self.q[from][to] = rate;
        self
    }

    pub fn dim(&self) -> usize {
        self.w0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let square = |m: usize, n: usize| m == d && n == d;
        if !square(self.adjacency.len(), self.adjacency.first().map_or(d, Vec::len))
            || self.adjacency.iter().any(|r| r.len() != d)
            || self.w.len() != d
            || self.w.iter().any(|r| r.len() != d)
            || self.q.len() != d
            || self.q.iter().any(|r| r.len() != d)
            || self.q0.len() != d
        {
            return param_err(format!("graph parameters are not consistently {d}-dimensional"));
        }
        for i in 0..d {
            if self.adjacency[i][i] {
                return param_err(format!("self edge on series {i}"));
            }
            for j in i + 1..d {
                if self.adjacency[i][j] && self.adjacency[j][i] {
                    return param_err(format!("parallel edges between series {i} and {j}"));
                }
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !self.w0.iter().all(|&v| positive(v)) || !self.w.iter().flatten().all(|&v| positive(v)) {
            return param_err("weights must be strictly positive");
        }
        if !self.q0.iter().all(|&v| unit(v)) || !self.q.iter().flatten().all(|&v| unit(v)) {
            return param_err("rates must lie strictly inside (0, 1)");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return param_err(format!("edge density {} outside (0, 1)", self.rho));
        }
        Ok(())
    }

    /// `Z_j = W0_j + Σ_i A_ij W_ij`.
    pub fn normalizer(&self, j: usize) -> f64 {
        self.w0[j]
            + (0..self.dim())
                .filter(|&i| self.adjacency[i][j])
                .map(|i| self.w[i][j])
                .sum::<f64>()
    }

    /// `(W*_0j, W*_1j, …, W*_dj)`, summing to one.
    pub fn normalized_weights(&self, j: usize) -> Vec<f64> {
        let z = self.normalizer(j);
        std::iter::once(self.w0[j] / z)
            .chain((0..self.dim()).map(|i| if self.adjacency[i][j] { self.w[i][j] / z } else { 0.0 }))
            .collect()
    }

    pub fn parents(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&i| self.adjacency[i][j])
    }

    pub fn children(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&i| self.adjacency[j][i])
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().flatten().filter(|&&a| a).count()
    }
}

/// Geometric delay kernel `q (1 - q)^(u - 1)` for `u ≥ 1`.
#[inline]
pub fn geometric_kernel(q: f64, u: usize) -> f64 {
    debug_assert!(u >= 1, "delay distance must be positive");
    q * (1.0 - q).powi(u as i32 - 1)
}

/// Change probability with the previous state of series `i` given by `prev(i)`.
#[inline]
pub(crate) fn change_prob_by(g: &GraphParams, j: usize, t: usize, prev: impl Fn(usize) -> usize) -> f64 {
    let mut num = g.w0[j] * g.q0[j];
    let mut z = g.w0[j];
    for i in 0..g.dim() {
        if g.adjacency[i][j] {
            z += g.w[i][j];
            let x = prev(i);
            if x > 0 {
                assert!(x + 1 < t, "state {x} of series {i} cannot precede time {t}");
                num += g.w[i][j] * geometric_kernel(g.q[i][j], t - x - 1);
            }
        }
    }
    num / z
}

/// `p_{j,t}(x_{t-1})`: prior probability that `X_{j,t} = t - 1`.
pub fn change_prob(j: usize, t: usize, x_prev: &[usize], g: &GraphParams) -> f64 {
    assert!(t >= 2, "transitions start at t = 2");
    change_prob_by(g, j, t, |i| x_prev[i])
}

/// Hidden states `X_{j,t}` for `t = 1..=len`, stored row-wise per series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenStateMatrix {
    rows: Vec<Vec<usize>>,
}

impl HiddenStateMatrix {
    /// No change-points anywhere: every state is 0.
    pub fn empty(d: usize, len: usize) -> Self {
        Self {
            rows: vec![vec![0; len]; d],
        }
    }

    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = Self { rows };
        m.validate()?;
        Ok(m)
    }

    /// Builds states from change-point times; a change-point at `c` means
    /// `X_{j,c+1} = c`, so valid times are `1..len`.
    pub fn from_change_points(d: usize, len: usize, changes: &[Vec<usize>]) -> Result<Self> {
        if changes.len() != d {
            return data_err(format!("{} change sets for {d} series", changes.len()));
        }
        let mut m = Self::empty(d, len);
        for (j, cps) in changes.iter().enumerate() {
            let mut flags = vec![false; len + 1];
            for &c in cps {
                if c == 0 || c >= len {
                    return data_err(format!("change-point {c} outside 1..{len}"));
                }
                flags[c + 1] = true;
            }
            for t in 2..=len {
                let v = if flags[t] { t - 1 } else { m.get(j, t - 1) };
                m.set(j, t, v);
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.rows.first().map_or(0, Vec::len);
        for (j, row) in self.rows.iter().enumerate() {
            if row.len() != len {
                return data_err(format!("state row {j} has length {} instead of {len}", row.len()));
            }
            if len > 0 && row[0] != 0 {
                return data_err(format!("series {j} does not start in state 0"));
            }
            for t in 2..=len {
                let (prev, cur) = (row[t - 2], row[t - 1]);
                if cur != t - 1 && cur != prev {
                    return data_err(format!("series {j}: state {cur} at t = {t} follows {prev}"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `X_{j,t}` for 1-based `t`.
    #[inline]
    pub fn get(&self, j: usize, t: usize) -> usize {
        self.rows[j][t - 1]
    }

    #[inline]
    pub(crate) fn set(&mut self, j: usize, t: usize, v: usize) {
        self.rows[j][t - 1] = v;
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    /// Replaces the path of series `j`; the caller guarantees validity.
    pub(crate) fn set_row(&mut self, j: usize, row: Vec<usize>) {
        debug_assert_eq!(row.len(), self.len());
        self.rows[j] = row;
    }

    pub fn column(&self, t: usize) -> Vec<usize> {
        self.rows.iter().map(|r| r[t - 1]).collect()
    }

    /// `U_{j,t} = 1(X_{j,t} = t - 1)` for `t ≥ 2`; time 1 is never a change.
    #[inline]
    pub fn indicator(&self, j: usize, t: usize) -> bool {
        t >= 2 && self.rows[j][t - 1] == t - 1
    }

    /// Change-point times `c` (with `X_{j,c+1} = c`) in increasing order.
    pub fn change_points(&self, j: usize) -> Vec<usize> {
        (2..=self.len()).filter(|&t| self.indicator(j, t)).map(|t| t - 1).collect()
    }

    pub(crate) fn push_column(&mut self, col: &[usize]) {
        for (r, &v) in self.rows.iter_mut().zip(col) {
            r.push(v);
        }
    }
}

/// `log Pr(X_{j,t} | X_{t-1})` summed over `t = 2..=len` for one series.
pub fn series_log_prior(j: usize, x: &HiddenStateMatrix, g: &GraphParams) -> f64 {
    let mut total = 0.0;
    for t in 2..=x.len() {
        let p = change_prob_by(g, j, t, |i| x.get(i, t - 1));
        total += if x.indicator(j, t) { p.ln() } else { (-p).ln_1p() };
    }
    total
}

/// Log prior probability of a full state matrix.
pub fn log_prior_x(x: &HiddenStateMatrix, g: &GraphParams) -> Result<f64> {
    x.validate()?;
    if x.dim() != g.dim() {
        return data_err(format!("{} state rows for {} graph vertices", x.dim(), g.dim()));
    }
    Ok((0..x.dim()).map(|j| series_log_prior(j, x, g)).sum())
}

/// Draws `X_{1:len}` forward from the prior.
pub fn simulate_prior_with<R: Rng + ?Sized>(g: &GraphParams, len: usize, rng: &mut R) -> HiddenStateMatrix {
    let d = g.dim();
    let mut x = HiddenStateMatrix::empty(d, len);
    let mut prev = vec![0usize; d];
    let mut next = vec![0usize; d];
    for t in 2..=len {
        for (j, slot) in next.iter_mut().enumerate() {
            let p = change_prob(j, t, &prev, g);
            *slot = if rng.random::<f64>() < p { t - 1 } else { prev[j] };
        }
        for (j, &v) in next.iter().enumerate() {
            x.set(j, t, v);
        }
        std::mem::swap(&mut prev, &mut next);
    }
    x
}

/// Seeded prior simulation.
pub fn simulate_prior(g: &GraphParams, len: usize, seed: u64) -> HiddenStateMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_prior_with(g, len, &mut rng)
}
