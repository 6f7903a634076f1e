//! Analytic-signal envelope via the FFT-based Hilbert transform.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Magnitude of the analytic signal of `x` (full-segment FFT method).
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);

    // analytic-signal spectrum: keep DC (and Nyquist for even n), double the
    // positive frequencies, zero the negative ones
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // unchanged
        } else if k < half || (n % 2 == 1 && k == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| (v * scale).norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_zero_envelope() {
        let env = hilbert_envelope(&vec![0.0; 64]);
        assert!(env.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoid_envelope_is_amplitude() {
        let fs = 500.0;
        let n = 2000;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 35.0 * i as f64 / fs).sin())
            .collect();
        let env = hilbert_envelope(&x);
        // central 80%
        let lo = n / 10;
        let hi = n - n / 10;
        for &v in &env[lo..hi] {
            assert!((0.98..=1.02).contains(&v), "envelope {v} outside [0.98, 1.02]");
        }
    }
}
