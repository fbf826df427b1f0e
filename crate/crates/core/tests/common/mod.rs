//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the library's density, prior or filter code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netcp::GraphParams;
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

// Gauss-Kronrod 7-15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let (f1, f2) = (f(c - h * XGK[k]), f(c + h * XGK[k]));
        kron += WGK[k] * (f1 + f2);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature to relative tolerance `rel`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    const PANELS: usize = 24;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..PANELS)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / PANELS as f64;
            let hi = a + (b - a) * (k + 1) as f64 / PANELS as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel * total.abs() || err < 1e-300 {
            break;
        }
        let worst = (0..parts.len()).max_by(|&x, &y| parts[x].3.total_cmp(&parts[y].3)).unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (x - mean).powi(2) / (2.0 * var)
}

/// `log ∫ Π N(y_i | θ, σ²) N(θ | 0, γ²) dθ` by quadrature.
pub fn gauss_mean_quadrature(y: &[f64], sigma2: f64, gamma2: f64) -> f64 {
    let log_f = |theta: f64| y.iter().map(|&v| normal_logpdf(v, theta, sigma2)).sum::<f64>() + normal_logpdf(theta, 0.0, gamma2);
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let (g, s) = (gamma2.sqrt(), sigma2.sqrt());
    let lo = (-14.0 * g).min(ybar - 14.0 * s);
    let hi = (14.0 * g).max(ybar + 14.0 * s);
    let reference = (0..=4000)
        .map(|k| log_f(lo + (hi - lo) * k as f64 / 4000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    reference + integrate(|th| (log_f(th) - reference).exp(), lo, hi, 1e-12).ln()
}

/// Direct multivariate normal evaluation of the same marginal, with
/// covariance `σ² I + γ² 1 1ᵀ`.
pub fn gauss_mean_direct(y: &[f64], sigma2: f64, gamma2: f64) -> f64 {
    let n = y.len();
    let cov = DMatrix::from_fn(n, n, |r, c| gamma2 + if r == c { sigma2 } else { 0.0 });
    mvn_logpdf(&DVector::from_column_slice(y), &cov)
}

fn mvn_logpdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (n * LN_2PI + ln_det + y.dot(&chol.solve(y)))
}

/// `log ∫∫ Π N(y_k | φ h_k, σ²) N(φ | 0, δσ²) IG(σ² | α, β) dφ dσ²` for a
/// single lag, by nested quadrature over `(φ, log σ²)`.
pub fn ar1_quadrature(y: &[f64], h: &[f64], alpha: f64, beta: f64, delta: f64) -> f64 {
    let hh: f64 = h.iter().map(|v| v * v).sum();
    let hy: f64 = h.iter().zip(y).map(|(a, b)| a * b).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let log_ig = |v: f64| alpha * beta.ln() - ln_gamma(alpha) - (alpha + 1.0) * v - beta * (-v).exp();
    let log_joint = |phi: f64, v: f64| {
        let s2 = v.exp();
        y.iter().zip(h).map(|(&yk, &hk)| normal_logpdf(yk, phi * hk, s2)).sum::<f64>()
            + normal_logpdf(phi, 0.0, delta * s2)
            + log_ig(v)
            + v
    };
    // integration window for φ at a given σ²: the Gaussian factor in φ only
    // locates the mass, the value is still computed numerically
    let window = move |v: f64| {
        let prec = hh + 1.0 / delta;
        let centre = hy / prec;
        let sd = (v.exp() / prec).sqrt();
        (centre - 14.0 * sd, centre + 14.0 * sd)
    };
    let v_lo = (beta / (alpha + y.len() as f64)).ln() - 12.0;
    let v_hi = ((beta + yy) / alpha).ln() + 40.0 / alpha;
    let mut reference = f64::NEG_INFINITY;
    for k in 0..=400 {
        let v = v_lo + (v_hi - v_lo) * k as f64 / 400.0;
        let (a, b) = window(v);
        for m in 0..=40 {
            reference = reference.max(log_joint(a + (b - a) * m as f64 / 40.0, v));
        }
    }
    let outer = integrate(
        |v| {
            let (a, b) = window(v);
            integrate(|phi| (log_joint(phi, v) - reference).exp(), a, b, 1e-11)
        },
        v_lo,
        v_hi,
        1e-10,
    );
    reference + outer.ln()
}

/// AR marginal through the multivariate Student-t form:
/// `y ~ t_{2α}(0, (β/α)(I + H D Hᵀ))`, `H` holding one row per observation.
pub fn ar_student_t(y: &[f64], design: &[Vec<f64>], alpha: f64, beta: f64, delta: &[f64]) -> f64 {
    let n = y.len();
    let lags = delta.len();
    let h = DMatrix::from_fn(n, lags, |r, c| design[r][c]);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(delta));
    let scale = (DMatrix::identity(n, n) + &h * d * h.transpose()) * (beta / alpha);
    let chol = scale.cholesky().expect("scale is positive definite");
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let yv = DVector::from_column_slice(y);
    let quad = yv.dot(&chol.solve(&yv));
    let nu = 2.0 * alpha;
    let nf = n as f64;
    ln_gamma((nu + nf) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * nf * (nu * std::f64::consts::PI).ln() - 0.5 * ln_det
        - (nu + nf) / 2.0 * (1.0 + quad / nu).ln()
}

/// Change probability from the mixture formula, written out directly.
pub fn oracle_change_prob(g: &GraphParams, j: usize, t: usize, prev: &[usize]) -> f64 {
    let mut num = g.w0[j] * g.q0[j];
    let mut den = g.w0[j];
    for i in 0..g.w0.len() {
        if g.adjacency[i][j] {
            den += g.w[i][j];
            if prev[i] > 0 {
                let u = (t - 1 - prev[i]) as i32;
                num += g.w[i][j] * g.q[i][j] * (1.0 - g.q[i][j]).powi(u - 1);
            }
        }
    }
    num / den
}

/// Every hidden-state row of length `len`, one per subset of change times.
pub fn all_rows(len: usize) -> Vec<Vec<usize>> {
    let free = len.saturating_sub(1);
    (0u32..(1 << free))
        .map(|mask| {
            let mut row = vec![0usize; len];
            for t in 2..=len {
                row[t - 1] = if mask & (1 << (t - 2)) != 0 { t - 1 } else { row[t - 2] };
            }
            row
        })
        .collect()
}

/// `log Π_t Pr(X_t | X_{t-1})` by direct evaluation.
pub fn oracle_log_prior(rows: &[Vec<usize>], g: &GraphParams) -> f64 {
    let len = rows[0].len();
    let mut total = 0.0;
    for t in 2..=len {
        let prev: Vec<usize> = rows.iter().map(|r| r[t - 2]).collect();
        for (j, r) in rows.iter().enumerate() {
            let p = oracle_change_prob(g, j, t, &prev);
            total += if r[t - 1] == t - 1 { p.ln() } else { (1.0 - p).ln() };
        }
    }
    total
}

/// Segments `(s, t]` of a row, in time order.
pub fn segments(row: &[usize]) -> Vec<(usize, usize)> {
    let len = row.len();
    let mut cuts: Vec<usize> = (2..=len).filter(|&t| row[t - 1] == t - 1).map(|t| t - 1).collect();
    cuts.push(len);
    let mut out = Vec::new();
    let mut s = 0;
    for c in cuts {
        out.push((s, c));
        s = c;
    }
    out
}

/// Log-sum-exp of a slice.
pub fn lse(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exhaustive joint posterior over all hidden-state configurations.
pub struct Enumeration {
    pub configs: Vec<Vec<Vec<usize>>>,
    /// Unnormalized log posterior of each configuration.
    pub log_weights: Vec<f64>,
}

impl Enumeration {
    /// `log_prior` and `log_seg(j, s, t)` define the model.
    pub fn new(
        d: usize,
        len: usize,
        log_prior: impl Fn(&[Vec<usize>]) -> f64,
        log_seg: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let rows = all_rows(len);
        let per = rows.len();
        let total = per.pow(d as u32);
        let mut configs = Vec::with_capacity(total);
        let mut log_weights = Vec::with_capacity(total);
        for code in 0..total {
            let mut c = code;
            let config: Vec<Vec<usize>> = (0..d)
                .map(|_| {
                    let r = rows[c % per].clone();
                    c /= per;
                    r
                })
                .collect();
            let lik: f64 = config
                .iter()
                .enumerate()
                .map(|(j, r)| segments(r).iter().map(|&(s, t)| log_seg(j, s, t)).sum::<f64>())
                .sum();
            log_weights.push(log_prior(&config) + lik);
            configs.push(config);
        }
        Self { configs, log_weights }
    }

    pub fn log_normalizer(&self) -> f64 {
        lse(&self.log_weights)
    }

    /// `Pr(U_{j,t} = 1 | y)`, indexed `[j][t-1]`.
    pub fn cp_marginals(&self) -> Vec<Vec<f64>> {
        let z = self.log_normalizer();
        let d = self.configs[0].len();
        let len = self.configs[0][0].len();
        let mut out = vec![vec![0.0; len]; d];
        for (cfg, lw) in self.configs.iter().zip(&self.log_weights) {
            let w = (lw - z).exp();
            for j in 0..d {
                for t in 2..=len {
                    if cfg[j][t - 1] == t - 1 {
                        out[j][t - 1] += w;
                    }
                }
            }
        }
        out
    }
}

/// Mean and batch-means standard error of a trace.
pub fn batch_mean_se(trace: &[f64], batches: usize) -> (f64, f64) {
    let size = trace.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (grand, (var / batches as f64).sqrt())
}

/// Sample correlation of two equally long 0/1 traces.
pub fn indicator_corr(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(u8::from(x)), f64::from(u8::from(y)));
        sa += x;
        sb += y;
        sab += x * y;
    }
    let (ma, mb) = (sa / n, sb / n);
    (sab / n - ma * mb) / ((ma * (1.0 - ma)) * (mb * (1.0 - mb))).sqrt()
}
