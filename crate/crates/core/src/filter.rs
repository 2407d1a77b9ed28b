//! Digital Butterworth low-pass filters.
//!
//! Designed from the analog prototype through the bilinear transform with
//! cutoff prewarping, and realized as a cascade of second-order sections.
//! Very low normalized cutoffs (the heating design uses 0.002 of Nyquist)
//! put the poles close to `z = 1`, where a single high-order polynomial
//! loses precision; the cascade does not.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff: f64,
    pub sample_rate: f64,
    pub sections: Vec<Section>,
    poles: Vec<Complex64>,
}

/// Designs an `order`-pole Butterworth low-pass with -3 dB point at `cutoff` Hz.
pub fn design_butterworth(order: usize, cutoff: f64, sample_rate: f64) -> Result<FilterSpec> {
    if order == 0 {
        return Err(Error::Parameter("filter order must be positive".into()));
    }
    if !(sample_rate > 0.0) || !(cutoff > 0.0 && cutoff < sample_rate / 2.0) {
        return Err(Error::Parameter(format!(
            "cutoff {cutoff} Hz must lie in (0, {}) Hz",
            sample_rate / 2.0
        )));
    }
    let fs2 = 2.0 * sample_rate;
    let warped = fs2 * (PI * cutoff / sample_rate).tan();
    let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);

    let mut sections = Vec::new();
    let mut poles = Vec::new();
    // Upper-half-plane poles of the prototype pair with their conjugates.
    for k in 1..=order / 2 {
        let angle = PI * (2 * k + order - 1) as f64 / (2 * order) as f64;
        let z = bilinear(Complex64::from_polar(warped, angle));
        poles.push(z);
        poles.push(z.conj());
        let mut sec = Section {
            b: [1.0, 2.0, 1.0],
            a: [-2.0 * z.re, z.norm_sqr()],
        };
        let g = 1.0 / sec.dc_gain();
        sec.b.iter_mut().for_each(|b| *b *= g);
        sections.push(sec);
    }
    if order % 2 == 1 {
        let z = bilinear(Complex64::new(-warped, 0.0)).re;
        poles.push(Complex64::new(z, 0.0));
        let mut sec = Section {
            b: [1.0, 1.0, 0.0],
            a: [-z, 0.0],
        };
        let g = 1.0 / sec.dc_gain();
        sec.b.iter_mut().for_each(|b| *b *= g);
        sections.push(sec);
    }
    Ok(FilterSpec {
        order,
        cutoff,
        sample_rate,
        sections,
        poles,
    })
}

impl FilterSpec {
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.norm() < 1.0)
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections.iter().map(Section::dc_gain).product()
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / self.sample_rate);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product()
    }

    pub fn magnitude(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    /// Expanded numerator coefficients in powers of `z⁻¹`.
    pub fn numerator(&self) -> Vec<f64> {
        self.sections
            .iter()
            .fold(vec![1.0], |acc, s| poly_mul(&acc, &s.b))
            .into_iter()
            .take(self.order + 1)
            .collect()
    }

    /// Expanded denominator coefficients in powers of `z⁻¹`, leading 1.
    pub fn denominator(&self) -> Vec<f64> {
        self.sections
            .iter()
            .fold(vec![1.0], |acc, s| poly_mul(&acc, &[1.0, s.a[0], s.a[1]]))
            .into_iter()
            .take(self.order + 1)
            .collect()
    }

    /// Causal filtering from zero initial state.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, 0.0)
    }

    /// Causal filtering with the state at rest at the first input value, so a
    /// signal that starts on a constant level has no startup step.
    pub fn apply_settled(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, x.first().copied().unwrap_or(0.0))
    }

    /// Sum of absolute impulse-response samples over `n` steps. Bounds the
    /// peak output over peak input, which exceeds 1 for Butterworth filters.
    pub fn impulse_l1_norm(&self, n: usize) -> f64 {
        let mut x = vec![0.0; n];
        if let Some(first) = x.first_mut() {
            *first = 1.0;
        }
        self.apply(&x).iter().map(|v| v.abs()).sum()
    }

    fn run(&self, x: &[f64], mut level: f64) -> Vec<f64> {
        let mut out = x.to_vec();
        for s in &self.sections {
            // Transposed direct form II, steady state for a constant `level`.
            let y0 = s.dc_gain() * level;
            let mut z1 = y0 - s.b[0] * level;
            let mut z2 = s.b[2] * level - s.a[1] * y0;
            for v in out.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[0] * y + z2;
                z2 = s.b[2] * xin - s.a[1] * y;
                *v = y;
            }
            level = y0;
        }
        out
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
