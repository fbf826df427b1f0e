//! Integrated autocorrelation time with Geyer's initial positive sequence.

/// `τ = 1 + 2 Σ_k ρ(k)`, truncated at the first non-positive pair sum
/// `ρ(2m) + ρ(2m+1)`. Returns `None` for a constant trace.
pub fn estimate_iat(trace: &[f64]) -> Option<f64> {
    let n = trace.len();
    if n < 2 {
        return None;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 1e-14 * (1.0 + mean * mean)) {
        return None;
    }
    let rho = |k: usize| centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * c0);
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = if m == 0 { 1.0 + rho(1) } else { rho(2 * m) + rho(2 * m + 1) };
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Some(tau.max(f64::MIN_POSITIVE))
}

/// [`estimate_iat`] for a binary indicator trace.
pub fn estimate_iat_bool(trace: &[bool]) -> Option<f64> {
    let v: Vec<f64> = trace.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    estimate_iat(&v)
}
