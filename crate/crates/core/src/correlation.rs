//! Exact lagged correlation of change indicators under the prior.
//!
//! The joint law of `X_t` is pushed forward one step at a time over the set of
//! reachable state vectors. Paths that reach the same state are merged, so the
//! cost is bounded by the number of distinct states rather than the number of
//! paths.

use std::collections::HashMap;

use crate::error::{NetcpError, Result};
use crate::prior::{change_prob, GraphParams};

/// Upper bound on state-transition evaluations.
pub const WORK_LIMIT: f64 = 1e8;

type Law = HashMap<Vec<usize>, f64>;

fn step(law: &Law, g: &GraphParams, t: usize) -> Law {
    let d = g.dim();
    let mut next = Law::with_capacity(law.len() * 2);
    let mut p = vec![0.0; d];
    let mut y = vec![0usize; d];
    for (x, &mass) in law {
        for (j, pj) in p.iter_mut().enumerate() {
            *pj = change_prob(j, t, x, g);
        }
        for mask in 0u32..(1 << d) {
            let mut pr = mass;
            for j in 0..d {
                if mask & (1 << j) != 0 {
                    y[j] = t - 1;
                    pr *= p[j];
                } else {
                    y[j] = x[j];
                    pr *= 1.0 - p[j];
                }
            }
            *next.entry(y.clone()).or_insert(0.0) += pr;
        }
    }
    next
}

/// Series with a directed path into `j`, possibly including `j` itself.
fn ancestors(g: &GraphParams, j: usize) -> Vec<bool> {
    let mut seen = vec![false; g.dim()];
    let mut stack = vec![j];
    while let Some(v) = stack.pop() {
        for k in g.parents(v) {
            if !seen[k] {
                seen[k] = true;
                stack.push(k);
            }
        }
    }
    seen
}

/// `U_{i,t}` is driven by the draws of `i` at `t` and of its ancestors before
/// `t`; `U_{j,t+h}` by `j` at `t+h` and its ancestors before `t+h`. With no
/// draw in common the indicators are independent.
fn structurally_independent(g: &GraphParams, i: usize, j: usize, h: usize) -> bool {
    let (ai, aj) = (ancestors(g, i), ancestors(g, j));
    let shared = ai.iter().zip(&aj).any(|(a, b)| *a && *b);
    if h == 0 {
        i != j && !shared
    } else {
        !shared && !aj[i]
    }
}

fn change_mass(law: &Law, j: usize, t: usize) -> f64 {
    law.iter().filter(|(x, _)| x[j] == t - 1).map(|(_, m)| m).sum()
}

/// `Cor(U_{i,t}, U_{j,t+h})` under the prior, for `t ≥ 2`.
pub fn exact_lagged_corr(g: &GraphParams, i: usize, j: usize, t: usize, h: usize) -> Result<f64> {
    g.validate()?;
    let d = g.dim();
    if d > 4 {
        return Err(NetcpError::Contract(format!("exact correlation supports d ≤ 4, got {d}")));
    }
    if i >= d || j >= d {
        return Err(NetcpError::Contract(format!("series index out of range for d = {d}")));
    }
    if t < 2 {
        return Err(NetcpError::Contract("U_{j,1} is constant; need t ≥ 2".into()));
    }
    if structurally_independent(g, i, j, h) {
        return Ok(0.0);
    }
    let horizon = t + h;
    // reachable states at time s number at most s^d, each with 2^d successors
    let work: f64 = (2..=horizon).map(|s| ((s - 1) as f64).powi(d as i32) * 2f64.powi(d as i32)).sum();
    if work > WORK_LIMIT {
        return Err(NetcpError::Resource(format!(
            "correlation recursion to time {horizon} with d = {d} needs ~{work:.2e} steps"
        )));
    }

    let mut law = Law::from([(vec![0usize; d], 1.0)]);
    for s in 2..=t {
        law = step(&law, g, s);
    }
    let e_i = change_mass(&law, i, t);
    // sub-distribution of X_t restricted to the event U_{i,t} = 1
    let mut joint: Law = law.iter().filter(|(x, _)| x[i] == t - 1).map(|(x, &m)| (x.clone(), m)).collect();
    for s in t + 1..=horizon {
        law = step(&law, g, s);
        joint = step(&joint, g, s);
    }
    let e_j = change_mass(&law, j, horizon);
    let e_ij = change_mass(&joint, j, horizon);
    let var = e_i * (1.0 - e_i) * e_j * (1.0 - e_j);
    if !(var > 0.0) {
        return Err(NetcpError::Numeric("change indicator has zero variance".into()));
    }
    Ok((e_ij - e_i * e_j) / var.sqrt())
}
