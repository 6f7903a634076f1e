use crate::error::{Error, Result};
use ndarray::ArrayView2;

/// Thresholds for the count-based time-domain features.
#[derive(Debug, Clone, Copy)]
pub struct TdfThresholds {
    /// Slope-sign-change noise threshold.
    pub ssc_eps: f64,
    /// Wilson amplitude threshold.
    pub wamp_theta: f64,
}

impl Default for TdfThresholds {
    fn default() -> Self {
        Self { ssc_eps: 0.0, wamp_theta: 0.01 }
    }
}

/// Classical time-domain EMG features, 7 per channel, concatenated in
/// channel order: mean absolute value, root mean square, maximum absolute
/// amplitude, waveform length, slope sign changes, Wilson amplitude, and
/// maximum fractal length.
pub fn tdf_features(window: ArrayView2<'_, f64>, th: TdfThresholds) -> Result<Vec<f64>> {
    let n = window.ncols();
    if n < 3 {
        return Err(Error::InsufficientData(format!("TDF needs >= 3 samples, got {n}")));
    }
    let mut out = Vec::with_capacity(7 * window.nrows());
    for row in window.rows() {
        let x = row;
        let mav = x.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let max_abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut wl = 0.0;
        let mut wamp = 0.0;
        let mut sum_sq_diff = 0.0;
        for t in 0..n - 1 {
            let d = x[t + 1] - x[t];
            wl += d.abs();
            if d.abs() > th.wamp_theta {
                wamp += 1.0;
            }
            sum_sq_diff += d * d;
        }
        let mut ssc = 0.0;
        for t in 1..n - 1 {
            let d1 = x[t] - x[t - 1];
            let d2 = x[t + 1] - x[t];
            if d1 * d2 < -th.ssc_eps {
                ssc += 1.0;
            }
        }
        let mfl = sum_sq_diff.sqrt().max(f64::MIN_POSITIVE).log10();
        out.extend_from_slice(&[mav, rms, max_abs, wl, ssc, wamp, mfl]);
    }
    Ok(out)
}
