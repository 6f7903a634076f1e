//! IIR filter design and application: Butterworth band-pass/low-pass via the
//! analog prototype + bilinear transform, biquad notch, cascaded second-order
//! sections, and forward-backward (zero-phase) filtering with odd-reflection
//! padding and steady-state initial conditions.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// DC gain H(z=1).
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Steady-state DF2T state for a unit-step input.
    fn step_zi(&self) -> (f64, f64) {
        let y = self.dc_gain();
        let s2 = self.b2 - self.a2 * y;
        let s1 = self.b1 - self.a1 * y + s2;
        (s1, s2)
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Total filter order (2 per section).
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Single-pass (causal) filtering with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b0 * xin + s1;
                s1 = s.b1 * xin - s.a1 * out + s2;
                s2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
        }
        y
    }

    fn filter_with_step_zi(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let x0 = *x.first().unwrap_or(&0.0);
        let mut scale = x0;
        for s in &self.sections {
            let (zi1, zi2) = s.step_zi();
            let (mut s1, mut s2) = (zi1 * scale, zi2 * scale);
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b0 * xin + s1;
                s1 = s.b1 * xin - s.a1 * out + s2;
                s2 = s.b2 * xin - s.a2 * out;
                *v = out;
            }
            scale *= s.dc_gain();
        }
        y
    }

    /// Forward-backward zero-phase filtering. The signal is extended at both
    /// ends by odd reflection over 3x the filter order before filtering, and
    /// each pass starts from the steady-state response to the first sample.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order()).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut y = self.filter_with_step_zi(&ext);
        y.reverse();
        let mut y = self.filter_with_step_zi(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Butterworth analog low-pass prototype poles (unit cutoff), order `n`.
fn prototype_poles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear_pole(s: Complex64, fs2: f64) -> Complex64 {
    (fs2 + s) / (fs2 - s)
}

fn prewarp(f_hz: f64, fs: f64) -> f64 {
    2.0 * fs * (std::f64::consts::PI * f_hz / fs).tan()
}

/// Designs a Butterworth band-pass filter of prototype order `order`
/// (2 x `order` poles total) as second-order sections.
pub fn butter_bandpass_sos(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Sos> {
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(Error::InvalidBand(format!(
            "band [{low_hz}, {high_hz}] invalid for fs = {fs}"
        )));
    }
    let fs2 = 2.0 * fs;
    let wl = prewarp(low_hz, fs);
    let wh = prewarp(high_hz, fs);
    let bw = wh - wl;
    let w0_sq = wl * wh;

    // Band-pass transform of each prototype pole p: roots of
    // s^2 - p*bw*s + w0^2 = 0.
    let mut s_poles = Vec::with_capacity(2 * order);
    for p in prototype_poles(order) {
        let half = p * bw / 2.0;
        let disc = (half * half - w0_sq).sqrt();
        s_poles.push(half + disc);
        s_poles.push(half - disc);
    }

    // Digital gain: analog gain bw^order, zeros at s = 0 (order of them).
    let mut num = Complex64::new(1.0, 0.0);
    let mut den = Complex64::new(1.0, 0.0);
    for _ in 0..order {
        num *= Complex64::new(fs2, 0.0); // fs2 - 0
    }
    for &p in &s_poles {
        den *= fs2 - p;
    }
    let gain = bw.powi(order as i32) * (num / den).re;

    // Each s-pole and its implicit conjugate form one digital section with
    // numerator (z^2 - 1): one zero at +1 (image of s = 0), one at -1
    // (image of infinity). Prototype poles come in conjugate pairs, so we
    // keep one representative per pair.
    let reps: Vec<Complex64> = s_poles.iter().copied().filter(|p| p.im >= 0.0).collect();
    debug_assert_eq!(reps.len(), order);
    let per_section = gain.abs().powf(1.0 / order as f64);
    let sign = if gain < 0.0 { -1.0 } else { 1.0 };
    let mut sections = Vec::with_capacity(order);
    for (i, &sp) in reps.iter().enumerate() {
        let z = bilinear_pole(sp, fs2);
        let k = if i == 0 { sign * per_section } else { per_section };
        sections.push(Biquad {
            b0: k,
            b1: 0.0,
            b2: -k,
            a1: -2.0 * z.re,
            a2: z.norm_sqr(),
        });
    }
    Ok(Sos { sections })
}

/// Designs a Butterworth low-pass filter of order `order` (even orders only)
/// as second-order sections.
pub fn butter_lowpass_sos(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
    if cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0 {
        return Err(Error::InvalidBand(format!(
            "cutoff {cutoff_hz} outside (0, Nyquist = {})",
            fs / 2.0
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "low-pass design supports even orders, got {order}"
        )));
    }
    let fs2 = 2.0 * fs;
    let wc = prewarp(cutoff_hz, fs);
    let s_poles: Vec<Complex64> = prototype_poles(order).iter().map(|p| p * wc).collect();

    let mut den = Complex64::new(1.0, 0.0);
    for &p in &s_poles {
        den *= fs2 - p;
    }
    let gain = wc.powi(order as i32) * (Complex64::new(1.0, 0.0) / den).re;

    let reps: Vec<Complex64> = s_poles.iter().copied().filter(|p| p.im > 0.0).collect();
    debug_assert_eq!(reps.len(), order / 2);
    let n_sections = reps.len();
    let per_section = gain.abs().powf(1.0 / n_sections as f64);
    let sign = if gain < 0.0 { -1.0 } else { 1.0 };
    let mut sections = Vec::with_capacity(n_sections);
    for (i, &sp) in reps.iter().enumerate() {
        let z = bilinear_pole(sp, fs2);
        let k = if i == 0 { sign * per_section } else { per_section };
        // two zeros at z = -1 per section
        sections.push(Biquad {
            b0: k,
            b1: 2.0 * k,
            b2: k,
            a1: -2.0 * z.re,
            a2: z.norm_sqr(),
        });
    }
    Ok(Sos { sections })
}

/// Biquad notch at `f0_hz` with quality factor `q`.
pub fn notch_sos(f0_hz: f64, q: f64, fs: f64) -> Result<Sos> {
    if f0_hz <= 0.0 || f0_hz >= fs / 2.0 {
        return Err(Error::InvalidBand(format!(
            "notch frequency {f0_hz} outside (0, Nyquist = {})",
            fs / 2.0
        )));
    }
    let w0 = 2.0 * std::f64::consts::PI * f0_hz / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    Ok(Sos {
        sections: vec![Biquad {
            b0: 1.0 / a0,
            b1: -2.0 * w0.cos() / a0,
            b2: 1.0 / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
        }],
    })
}
