//! Stratified optimal resampling without duplicates, optionally conditioned
//! on one particle that must survive.

use rand::Rng;

use crate::error::{NetcpError, Result};

/// Threshold `κ` with `Σ min(w/κ, 1) = n`, and the number of weights strictly
/// above it. Requires more than `n` positive weights.
pub fn sor_threshold(weights: &[f64], n: usize) -> (f64, usize) {
    let mut sorted: Vec<f64> = weights.iter().copied().filter(|&w| w > 0.0).collect();
    debug_assert!(sorted.len() > n && n >= 1);
    sorted.sort_by(|a, b| b.total_cmp(a));
    // suffix sums from the small end keep the tail accurate
    let mut tail = vec![0.0; sorted.len() + 1];
    for k in (0..sorted.len()).rev() {
        tail[k] = tail[k + 1] + sorted[k];
    }
    // the first k whose weight does not exceed its candidate threshold; every
    // earlier weight exceeds it, and k = n - 1 always qualifies
    for k in 0..n {
        let kappa = tail[k] / (n - k) as f64;
        if sorted[k] <= kappa {
            return (kappa, k);
        }
    }
    unreachable!("the last candidate threshold covers the remaining weights")
}

/// Stratified survivor selection over candidates with normalized `weights`.
///
/// `u ∈ [0, 1)` drives the single uniform draw: unconditioned, the first grid
/// point is `u/m`; conditioned on candidate `c`, the anchor point is drawn
/// uniformly inside `c`'s CDF interval. Returns survivor indices in
/// increasing order.
pub fn stratified_resample_pinned(weights: &[f64], m: usize, condition_on: Option<usize>, u: f64) -> Result<Vec<usize>> {
    let n = weights.len();
    if m == 0 || m > n {
        return Err(NetcpError::Contract(format!("cannot select {m} survivors from {n} candidates")));
    }
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    cdf[n - 1] = 1.0;
    let step = 1.0 / m as f64;
    let v1 = match condition_on {
        None => u * step,
        Some(c) => {
            let lo = if c == 0 { 0.0 } else { cdf[c - 1] };
            // (1 - u) ∈ (0, 1] keeps V* inside the half-open interval (Q(c-1), Q(c)]
            let v_star = lo + (1.0 - u) * (cdf[c] - lo);
            // grid offset in (0, 1/m] so that V* itself is a grid point
            v_star - ((m as f64 * v_star).ceil() - 1.0) * step
        }
    };
    let mut survivors = Vec::with_capacity(m);
    let mut s = 0;
    for p in 0..m {
        let v = v1 + p as f64 * step;
        // smallest s with v <= Q(s); V = Q(s-1) exactly is not inside (Q(s-1), Q(s)]
        while s + 1 < n && v > cdf[s] {
            s += 1;
        }
        if survivors.last() != Some(&s) {
            survivors.push(s);
        }
    }
    if let Some(c) = condition_on {
        if let Err(pos) = survivors.binary_search(&c) {
            // only reachable when the conditioned weight underflowed to zero
            survivors.insert(pos, c);
        }
    }
    Ok(survivors)
}

pub fn stratified_resample<R: Rng + ?Sized>(
    weights: &[f64],
    m: usize,
    condition_on: Option<usize>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    stratified_resample_pinned(weights, m, condition_on, rng.random::<f64>())
}

/// Result of one resampling step: surviving particles and their new
/// normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub states: Vec<usize>,
    pub weights: Vec<f64>,
    pub kappa: f64,
}

/// Conditional stratified optimal resampling down to `n` particles.
///
/// `states` must be strictly increasing and `weights` normalized. Particles
/// with weight above `κ` keep their weight; the rest are thinned by stratified
/// resampling to exactly the remaining slots and receive weight `κ`. The
/// particle whose state equals `keep` always survives. Zero-weight particles
/// are never candidates.
pub fn conditional_sor<R: Rng + ?Sized>(
    states: &[usize],
    weights: &[f64],
    n: usize,
    keep: Option<usize>,
    rng: &mut R,
) -> Result<Resampled> {
    conditional_sor_pinned(states, weights, n, keep, rng.random::<f64>())
}

pub fn conditional_sor_pinned(
    states: &[usize],
    weights: &[f64],
    n: usize,
    keep: Option<usize>,
    u: f64,
) -> Result<Resampled> {
    if n == 0 || states.len() != weights.len() {
        return Err(NetcpError::Contract("resampling needs n ≥ 1 and one weight per state".into()));
    }
    let keep_idx = match keep {
        Some(k) => Some(
            states
                .binary_search(&k)
                .map_err(|_| NetcpError::Contract(format!("conditioned state {k} is not a particle")))?,
        ),
        None => None,
    };
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive <= n {
        let idx: Vec<usize> = (0..states.len())
            .filter(|&i| weights[i] > 0.0 || Some(i) == keep_idx)
            .collect();
        let total: f64 = idx.iter().map(|&i| weights[i]).sum();
        return Ok(Resampled {
            states: idx.iter().map(|&i| states[i]).collect(),
            weights: idx.iter().map(|&i| weights[i] / total).collect(),
            kappa: 0.0,
        });
    }

    let (kappa, big) = sor_threshold(weights, n);
    // rank positions so ties at κ are split exactly as the threshold solver did
    let mut order: Vec<usize> = (0..states.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut in_a = vec![false; states.len()];
    for &i in &order[..big] {
        in_a[i] = true;
    }
    let b_idx: Vec<usize> = (0..states.len()).filter(|&i| weights[i] > 0.0 && !in_a[i]).collect();
    let b_weights: Vec<f64> = b_idx.iter().map(|&i| weights[i]).collect();
    let m = n - big;
    let cond = keep_idx.and_then(|k| b_idx.iter().position(|&i| i == k));
    let chosen = stratified_resample_pinned(&b_weights, m, cond, u)?;

    let mut survive = in_a;
    for c in chosen {
        survive[b_idx[c]] = true;
    }
    if let Some(k) = keep_idx {
        survive[k] = true;
    }
    let mut out_states = Vec::with_capacity(n);
    let mut out_weights = Vec::with_capacity(n);
    for i in 0..states.len() {
        if survive[i] {
            out_states.push(states[i]);
            out_weights.push(if weights[i] > kappa { weights[i] } else { kappa });
        }
    }
    let total: f64 = out_weights.iter().sum();
    for w in out_weights.iter_mut() {
        *w /= total;
    }
    Ok(Resampled {
        states: out_states,
        weights: out_weights,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bisect_kappa(w: &[f64], n: usize) -> f64 {
        let f = |k: f64| w.iter().map(|x| (x / k).min(1.0)).sum::<f64>() - n as f64;
        let (mut lo, mut hi) = (1e-300, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn threshold_fixtures() {
        let (k, big) = sor_threshold(&[0.4, 0.3, 0.2, 0.1], 2);
        assert!((k - 0.5).abs() < 1e-15);
        assert_eq!(big, 0);
        let (k, big) = sor_threshold(&[0.7, 0.1, 0.1, 0.1], 2);
        assert!((k - 0.3).abs() < 1e-15);
        assert_eq!(big, 1);
    }

    #[test]
    fn pinned_stratified_rule() {
        assert_eq!(stratified_resample_pinned(&[0.5, 0.5], 1, None, 0.3).unwrap(), vec![0]);
        for u in [0.0, 0.2, 0.5, 0.99] {
            assert_eq!(stratified_resample_pinned(&[0.5, 0.5], 1, Some(1), u).unwrap(), vec![1]);
        }
        assert!(stratified_resample_pinned(&[0.5, 0.5], 3, None, 0.1).is_err());
    }

    #[test]
    fn dominant_particle_kept_outright() {
        for u in [0.01, 0.4, 0.9] {
            let r = conditional_sor_pinned(&[0, 1, 2, 3], &[0.7, 0.1, 0.1, 0.1], 2, None, u).unwrap();
            assert_eq!(r.states.len(), 2);
            assert_eq!(r.states[0], 0);
            assert!((r.weights[0] - 0.7).abs() < 1e-12 && (r.weights[1] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioned_smallest_always_survives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let r = conditional_sor(&[2, 5, 7, 9], &[0.4, 0.3, 0.2, 0.1], 2, Some(9), &mut rng).unwrap();
            assert!(r.states.contains(&9));
            assert_eq!(r.states.len(), 2);
        }
    }

    #[test]
    fn zero_weights_never_survive() {
        let r = conditional_sor_pinned(&[0, 1, 2], &[0.5, 0.0, 0.5], 2, None, 0.5).unwrap();
        assert_eq!(r.states, vec![0, 2]);
        let r = conditional_sor_pinned(&[0, 1, 2, 3], &[0.5, 0.0, 0.25, 0.25], 2, None, 0.5).unwrap();
        assert!(!r.states.contains(&1));
    }

    proptest! {
        #[test]
        fn kappa_solves_its_equation(raw in prop::collection::vec(1e-6f64..1.0, 3..40), frac in 0.05f64..0.95) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let n = ((w.len() - 1) as f64 * frac).max(1.0) as usize;
            let (k, _) = sor_threshold(&w, n);
            let s: f64 = w.iter().map(|x| (x / k).min(1.0)).sum();
            prop_assert!((s - n as f64).abs() <= 1e-10);
            prop_assert!((k - bisect_kappa(&w, n)).abs() <= 1e-9 * k.max(1e-12));
        }

        #[test]
        fn output_is_sorted_sized_and_normalized(
            raw in prop::collection::vec(1e-6f64..1.0, 3..40),
            frac in 0.05f64..0.95,
            keep_pick in any::<prop::sample::Index>(),
            u in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let states: Vec<usize> = (0..w.len()).map(|i| 3 * i + 1).collect();
            let n = ((w.len() - 1) as f64 * frac).max(1.0) as usize;
            let keep = states[keep_pick.index(states.len())];
            let r = conditional_sor_pinned(&states, &w, n, Some(keep), u).unwrap();
            prop_assert_eq!(r.states.len(), n);
            prop_assert!(r.states.windows(2).all(|p| p[0] < p[1]));
            prop_assert!(r.states.contains(&keep));
            prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
