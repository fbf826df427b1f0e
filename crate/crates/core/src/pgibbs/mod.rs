//! Blocked updates of one series' hidden-state path.
//!
//! With the other series held fixed, the path `x_{j,1:T}` is a Markov chain
//! whose step `t` carries the potential
//!
//! ```text
//! a_t(x_t | x_{t-1}) = [p_{j,t} if x_t = t-1, (1 - p_{j,t}) if x_t = x_{t-1}] · c_t(x_t)
//! ```
//!
//! where `c_t(v)` is the probability of every child's transition into `t + 1`
//! with series `j` at state `v`. The filter multiplies these potentials by the
//! segment predictive densities, so with enough particles it is the exact
//! forward recursion of the conditional posterior.

mod resample;
mod single_site;

pub use resample::{
    conditional_sor, conditional_sor_pinned, sor_threshold, stratified_resample, stratified_resample_pinned, Resampled,
};
pub use single_site::single_site_update;

use rand::Rng;

use crate::error::{NetcpError, Result};
use crate::numeric::{log_sum_exp, normalize_log, pick_log};
use crate::prior::{change_prob_by, geometric_kernel, GraphParams, HiddenStateMatrix};
use crate::segment::SegmentDensities;

#[derive(Debug, Clone)]
struct ChildTerm {
    /// `W_ji / Z_i`.
    weight: f64,
    rate: f64,
    /// `base[t]`: change probability of the child at `t + 1` excluding the
    /// contribution of series `j`.
    base: Vec<f64>,
    /// `changed[t]`: the child changes at `t + 1`.
    changed: Vec<bool>,
}

/// Conditional transition structure of series `j` given all other series.
#[derive(Debug, Clone)]
pub struct CondTransitionCtx {
    j: usize,
    len: usize,
    log_p: Vec<f64>,
    log_stay: Vec<f64>,
    children: Vec<ChildTerm>,
}

impl CondTransitionCtx {
    pub fn new(j: usize, x: &HiddenStateMatrix, g: &GraphParams) -> Self {
        let len = x.len();
        let mut log_p = vec![f64::NEG_INFINITY; len + 1];
        let mut log_stay = vec![0.0; len + 1];
        for t in 2..=len {
            let p = change_prob_by(g, j, t, |i| x.get(i, t - 1));
            log_p[t] = p.ln();
            log_stay[t] = (-p).ln_1p();
        }
        let children = g
            .children(j)
            .map(|i| {
                let z = g.normalizer(i);
                let mut base = vec![0.0; len + 1];
                let mut changed = vec![false; len + 1];
                for t in 1..len {
                    let mut num = g.w0[i] * g.q0[i];
                    for k in g.parents(i).filter(|&k| k != j) {
                        let xk = x.get(k, t);
                        if xk > 0 {
                            num += g.w[k][i] * geometric_kernel(g.q[k][i], t - xk);
                        }
                    }
                    base[t] = num / z;
                    changed[t] = x.indicator(i, t + 1);
                }
                ChildTerm {
                    weight: g.w[j][i] / z,
                    rate: g.q[j][i],
                    base,
                    changed,
                }
            })
            .collect();
        Self {
            j,
            len,
            log_p,
            log_stay,
            children,
        }
    }

    pub fn series(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `log c_t(v)`: children's transitions into `t + 1` with `x_{j,t} = v`.
    #[inline]
    pub fn log_children(&self, t: usize, v: usize) -> f64 {
        if t >= self.len {
            return 0.0;
        }
        let mut total = 0.0;
        for c in &self.children {
            let mut p = c.base[t];
            if v > 0 {
                p += c.weight * geometric_kernel(c.rate, t - v);
            }
            total += if c.changed[t] { p.ln() } else { (-p).ln_1p() };
        }
        total
    }

    /// Unnormalized log potential of moving from `x_cur` at `t - 1` to
    /// `x_next` at `t`.
    #[inline]
    pub fn log_potential(&self, t: usize, x_next: usize, x_cur: usize) -> f64 {
        let own = if x_next == t - 1 { self.log_p[t] } else { self.log_stay[t] };
        debug_assert!(x_next == t - 1 || x_next == x_cur);
        own + self.log_children(t, x_next)
    }
}

/// Log transition PMF of series `j` at `t`, normalized over the two
/// candidates `{t - 1, x_cur}`.
pub fn cond_transition_logpmf(ctx: &CondTransitionCtx, t: usize, x_next: usize, x_cur: usize) -> Result<f64> {
    if t < 2 || t > ctx.len {
        return Err(NetcpError::Contract(format!("transition time {t} outside 2..={}", ctx.len)));
    }
    if x_cur + 1 >= t || (x_next != t - 1 && x_next != x_cur) {
        return Err(NetcpError::Contract(format!(
            "state {x_next} at {t} cannot follow state {x_cur}"
        )));
    }
    let change = ctx.log_potential(t, t - 1, x_cur);
    let stay = ctx.log_potential(t, x_cur, x_cur);
    let chosen = if x_next == t - 1 { change } else { stay };
    Ok(chosen - log_sum_exp(&[change, stay]))
}

/// Filter supports and normalized log-weights for every time step.
#[derive(Debug, Clone, Default)]
pub struct ParticleSystem {
    offsets: Vec<usize>,
    states: Vec<usize>,
    log_weights: Vec<f64>,
    budget: usize,
}

impl ParticleSystem {
    fn with_capacity(len: usize, budget: usize) -> Self {
        let per = budget.min(len) + 1;
        let mut offsets = Vec::with_capacity(len + 2);
        offsets.push(0);
        offsets.push(0);
        Self {
            offsets,
            states: Vec::with_capacity(len * per),
            log_weights: Vec::with_capacity(len * per),
            budget,
        }
    }

    fn push(&mut self, states: &[usize], log_weights: &[f64]) {
        self.states.extend_from_slice(states);
        self.log_weights.extend_from_slice(log_weights);
        self.offsets.push(self.states.len());
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(2)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Particle budget `N`.
    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `𝒮_t` in increasing order, `t` 1-based.
    pub fn support(&self, t: usize) -> &[usize] {
        &self.states[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn log_weights(&self, t: usize) -> &[f64] {
        &self.log_weights[self.offsets[t]..self.offsets[t + 1]]
    }
}

/// Conditional particle filter for the path of series `ctx.series()`.
///
/// `conditioned` is the path that must survive every resampling step, or
/// `None` for an unconditioned filter.
pub fn particle_filter<R: Rng + ?Sized>(
    ctx: &CondTransitionCtx,
    conditioned: Option<&[usize]>,
    n: usize,
    dens: &mut SegmentDensities<'_>,
    rng: &mut R,
) -> Result<ParticleSystem> {
    if n < 2 {
        return Err(NetcpError::Parameter(format!("particle budget {n} is below 2")));
    }
    let j = ctx.j;
    let len = ctx.len;
    let mut sys = ParticleSystem::with_capacity(len, n);
    if len == 0 {
        return Ok(sys);
    }
    // segment log densities log f(y_{s+1:t-1}) of the current support
    let mut states = vec![0usize];
    let mut seg = vec![dens.log_marginal(j, 0, 1)?];
    let mut logw = vec![0.0];
    sys.push(&states, &logw);

    let mut next_states = Vec::with_capacity(n + 1);
    let mut next_seg = Vec::with_capacity(n + 1);
    let mut next_logw = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for t in 2..=len {
        next_states.clear();
        next_seg.clear();
        next_logw.clear();
        let log_stay = ctx.log_stay[t];
        for (k, &s) in states.iter().enumerate() {
            let f = dens.log_marginal(j, s, t)?;
            next_states.push(s);
            next_logw.push(logw[k] + log_stay + ctx.log_children(t, s) + f - seg[k]);
            next_seg.push(f);
        }
        let f_birth = dens.log_marginal(j, t - 1, t)?;
        next_states.push(t - 1);
        next_logw.push(log_sum_exp(&logw) + ctx.log_p[t] + ctx.log_children(t, t - 1) + f_birth);
        next_seg.push(f_birth);

        let lse = normalize_log(&mut next_logw);
        if !lse.is_finite() {
            return Err(NetcpError::Numeric(format!("all particle weights vanished at t = {t} in series {j}")));
        }

        if next_states.len() > n {
            weights.clear();
            weights.extend(next_logw.iter().map(|v| v.exp()));
            let keep = conditioned.map(|path| path[t - 1]);
            let r = conditional_sor(&next_states, &weights, n, keep, rng)?;
            // survivors appear in the same order as their source indices
            let mut src = 0;
            states.clear();
            seg.clear();
            logw.clear();
            for (&s, &w) in r.states.iter().zip(&r.weights) {
                while next_states[src] != s {
                    src += 1;
                }
                states.push(s);
                seg.push(next_seg[src]);
                logw.push(w.ln());
            }
        } else {
            std::mem::swap(&mut states, &mut next_states);
            std::mem::swap(&mut seg, &mut next_seg);
            std::mem::swap(&mut logw, &mut next_logw);
        }
        sys.push(&states, &logw);
    }
    Ok(sys)
}

/// Draws a path backward through the stored filter weights.
///
/// The change branch of the transition into `t + 1` does not depend on the
/// state at `t`, so after a change at `t` the previous state is drawn from
/// the filter weights alone; otherwise the state is copied.
pub fn backward_sample<R: Rng + ?Sized>(sys: &ParticleSystem, rng: &mut R) -> Result<Vec<usize>> {
    let len = sys.len();
    if len == 0 {
        return Ok(Vec::new());
    }
    let mut path = vec![0usize; len];
    let pick = |t: usize, rng: &mut R| sys.support(t)[pick_log(sys.log_weights(t), rng.random::<f64>())];
    path[len - 1] = pick(len, rng);
    for t in (1..len).rev() {
        let next = path[t];
        path[t - 1] = if next == t {
            pick(t, rng)
        } else if sys.support(t).binary_search(&next).is_ok() {
            next
        } else {
            return Err(NetcpError::Numeric(format!("state {next} missing from the support at t = {t}")));
        };
    }
    Ok(path)
}

/// One particle Gibbs update of series `j`; returns the new path.
pub fn pg_update_series<R: Rng + ?Sized>(
    j: usize,
    x_star: &HiddenStateMatrix,
    g: &GraphParams,
    n: usize,
    dens: &mut SegmentDensities<'_>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let ctx = CondTransitionCtx::new(j, x_star, g);
    let sys = particle_filter(&ctx, Some(x_star.row(j)), n, dens, rng)?;
    backward_sample(&sys, rng)
}
