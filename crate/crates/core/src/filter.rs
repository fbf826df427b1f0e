//! Butterworth bandpass design (bilinear transform) and causal filtering.

use std::f64::consts::PI;

use nalgebra::Complex;

use crate::error::{data_err, param_err, Result};

/// One second-order section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let z2 = z_inv * z_inv;
        let num = Complex::new(self.b[0], 0.0) + z_inv * self.b[1] + z2 * self.b[2];
        let den = Complex::new(self.a[0], 0.0) + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }
}

/// Digital Butterworth bandpass filter as a cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    rate_hz: f64,
}

impl BandpassFilter {
    /// Designs an order-`order` bandpass (2·order poles) from the analog
    /// Butterworth prototype with pre-warped band edges.
    pub fn butterworth(order: usize, low_hz: f64, high_hz: f64, rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return param_err("filter order must be at least 1");
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return param_err(format!("sample rate must be positive, got {rate_hz}"));
        }
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < rate_hz / 2.0) {
            return param_err(format!(
                "band edges must satisfy 0 < low < high < rate/2, got {low_hz}, {high_hz} at {rate_hz} Hz"
            ));
        }

        let fs2 = 2.0 * rate_hz;
        let w_lo = fs2 * (PI * low_hz / rate_hz).tan();
        let w_hi = fs2 * (PI * high_hz / rate_hz).tan();
        let bw = w_hi - w_lo;
        let w0 = (w_lo * w_hi).sqrt();

        let n = order as f64;
        let mut poles = Vec::with_capacity(2 * order);
        for k in 1..=order {
            let proto = Complex::from_polar(1.0, PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n));
            let half = proto * (bw / 2.0);
            let disc = (half * half - Complex::new(w0 * w0, 0.0)).sqrt();
            for s in [half + disc, half - disc] {
                let fs2c = Complex::new(fs2, 0.0);
                poles.push((fs2c + s) / (fs2c - s));
            }
        }

        let mut sections = Vec::with_capacity(order);
        let mut real = Vec::new();
        for p in &poles {
            if p.im.abs() <= 1e-12 * p.norm().max(1.0) {
                real.push(p.re);
            } else if p.im > 0.0 {
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -2.0 * p.re, p.norm_sqr()],
                });
            }
        }
        real.sort_by(f64::total_cmp);
        for pair in real.chunks(2) {
            let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -(r1 + r2), r1 * r2],
            });
        }

        let mut filter = Self { sections, rate_hz };
        let center = (w0 / fs2).atan() * 2.0 * rate_hz / (2.0 * PI);
        let gain = 1.0 / filter.magnitude(center);
        for c in filter.sections[0].b.iter_mut() {
            *c *= gain;
        }
        Ok(filter)
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// `|H(e^{iω})|` at `freq_hz`, evaluated from the section coefficients.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let omega = 2.0 * PI * freq_hz / self.rate_hz;
        let z_inv = Complex::from_polar(1.0, -omega);
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm()
    }

    /// Forward (causal) pass, transposed direct form II per section.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return data_err(format!("non-finite filter input at index {i}"));
        }
        let mut out = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * y + z2;
                z2 = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
        }
        Ok(out)
    }
}

/// Causal Butterworth bandpass of `x`; output has the same length.
pub fn bandpass_filter(x: &[f64], low_hz: f64, high_hz: f64, order: usize, rate_hz: f64) -> Result<Vec<f64>> {
    BandpassFilter::butterworth(order, low_hz, high_hz, rate_hz)?.apply(x)
}
