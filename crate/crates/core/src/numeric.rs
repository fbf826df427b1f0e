//! Small log-space helpers.

/// `log Σ exp(v)`; `-inf` for an empty slice or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Shifts `values` so that they log-sum-exp to zero and returns the shift.
pub fn normalize_log(values: &mut [f64]) -> f64 {
    let lse = log_sum_exp(values);
    if lse.is_finite() {
        for v in values.iter_mut() {
            *v -= lse;
        }
    }
    lse
}

/// Index drawn with probability proportional to `exp(log_w)`, given a uniform
/// `u ∈ [0, 1)`.
pub fn pick_log(log_w: &[f64], u: f64) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|v| (v - max).exp()).sum();
    let mut target = u * total;
    for (i, v) in log_w.iter().enumerate() {
        target -= (v - max).exp();
        if target < 0.0 {
            return i;
        }
    }
    // rounding can leave a sliver past the end; return the last positive entry
    log_w.iter().rposition(|v| v.is_finite()).unwrap_or(log_w.len() - 1)
}
