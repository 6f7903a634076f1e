//! Automatic temporal alignment of EMG and kinematics streams.
//!
//! The two acquisition devices free-run on their own clocks, so recordings
//! start with an unknown relative offset. Alignment exploits the physiology:
//! muscle drive precedes movement, and bursts of EMG envelope energy
//! ("move commands") co-occur with bursts of joint speed. Both streams are
//! reduced to slow scalar activity traces and the lag maximizing their
//! Pearson correlation over a bounded search range is taken as the offset.

use crate::error::{Error, Result};
use crate::signal::{envelope, lowpass_zero_phase, EmgRecording, KinematicsTrack};
use ndarray::Array2;

/// Per-channel "move command": the transient part of the EMG envelope.
///
/// For each channel: Hilbert envelope, minus a centered 2 s moving-average
/// hold baseline, rectified, then smoothed with a 3 Hz zero-phase low-pass.
/// Output is `[n_channels x n_samples]`, non-negative.
pub fn move_command(rec: &EmgRecording) -> Result<Array2<f64>> {
    let env = envelope(rec)?;
    let n = env.data.ncols();
    let hold_win = (2.0 * rec.fs).round() as usize;
    if n < hold_win {
        return Err(Error::InsufficientData(format!(
            "move command needs >= 2 s of signal ({hold_win} samples), got {n}"
        )));
    }
    let mut out = Array2::zeros(env.data.dim());
    for (c, ch) in env.data.rows().into_iter().enumerate() {
        let ch: Vec<f64> = ch.to_vec();
        let hold = crate::signal::moving_average(&ch, hold_win);
        let excess: Vec<f64> = ch
            .iter()
            .zip(hold.iter())
            .map(|(&e, &h)| (e - h).max(0.0))
            .collect();
        let smoothed = lowpass_zero_phase(&excess, 3.0, rec.fs)?;
        for (i, &v) in smoothed.iter().enumerate() {
            out[(c, i)] = v.max(0.0);
        }
    }
    Ok(out)
}

/// Scalar joint-speed trace at the kinematics rate: central-difference
/// velocity per joint in deg/s, 3 Hz zero-phase low-pass, then the maximum
/// absolute velocity across joints at each instant.
pub fn joint_speed(kin: &KinematicsTrack) -> Result<Vec<f64>> {
    let (n_joints, n) = kin.angles.dim();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "joint speed needs >= 3 samples, got {n}"
        )));
    }
    let dt = 1.0 / kin.fs;
    let mut out = vec![0.0f64; n];
    for j in 0..n_joints {
        let a = kin.angles.row(j);
        let mut v = vec![0.0; n];
        for t in 1..n - 1 {
            v[t] = (a[t + 1] - a[t - 1]) / (2.0 * dt);
        }
        v[0] = (a[1] - a[0]) / dt;
        v[n - 1] = (a[n - 1] - a[n - 2]) / dt;
        let v = lowpass_zero_phase(&v, 3.0, kin.fs)?;
        for (o, &vi) in out.iter_mut().zip(v.iter()) {
            *o = (*o).max(vi.abs());
        }
    }
    Ok(out)
}

/// Default offset search range.
pub const DEFAULT_MAX_LAG_MS: f64 = 1000.0;

/// Result of the offset search.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    /// Kinematics delay relative to EMG, in milliseconds. Positive means
    /// the kinematics stream lags the EMG stream.
    pub offset_ms: f64,
    /// Pearson correlation at the chosen lag.
    pub peak_correlation: f64,
    /// (lag ms, correlation) per candidate lag, for diagnostics.
    pub correlation_curve: Vec<(f64, f64)>,
}

/// Pearson correlation of two equal-length slices.
fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let constant = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    if constant(a) || constant(b) {
        return Err(Error::UndefinedCorrelation(
            "constant activity trace; correlation undefined".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant activity trace; correlation undefined".into(),
        ));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Lag search between two activity traces on a shared sample grid.
///
/// The search covers `[-max_lag_ms, +max_lag_ms]` in single-sample steps
/// and requires at least 10 s of overlap at every candidate lag. A positive
/// result means `speed` lags `command`. Ties within 1e-12 of the best
/// correlation resolve to the smallest absolute lag.
pub fn find_offset_traces(
    command: &[f64],
    speed: &[f64],
    fs: f64,
    max_lag_ms: f64,
) -> Result<SyncResult> {
    if fs <= 0.0 || !fs.is_finite() {
        return Err(Error::InvalidInput(format!("sample rate must be positive, got {fs}")));
    }
    let max_lag = (max_lag_ms / 1000.0 * fs).round() as i64;
    let min_overlap = (10.0 * fs).ceil() as usize;
    let n = command.len().min(speed.len());
    if n < min_overlap + max_lag.unsigned_abs() as usize {
        return Err(Error::InsufficientData(format!(
            "offset search needs >= {:.0} s of shared signal at the maximum lag, got {:.1} s",
            10.0 + max_lag_ms / 1000.0,
            n as f64 / fs
        )));
    }

    let mut curve = Vec::with_capacity((2 * max_lag + 1) as usize);
    let mut best: Option<(f64, i64)> = None;
    for lag in -max_lag..=max_lag {
        // positive lag: kinematics delayed, so speed[t + lag] lines up with
        // command[t]
        let (a, b) = if lag >= 0 {
            let l = lag as usize;
            (&command[..n - l], &speed[l..n])
        } else {
            let l = (-lag) as usize;
            (&command[l..n], &speed[..n - l])
        };
        let r = pearson(a, b)?;
        curve.push((lag as f64 / fs * 1000.0, r));
        let better = match best {
            None => true,
            Some((br, blag)) => {
                r > br + 1e-12 || ((r - br).abs() <= 1e-12 && lag.abs() < blag.abs())
            }
        };
        if better {
            best = Some((r, lag));
        }
    }
    let (peak_correlation, lag) = best.unwrap();
    Ok(SyncResult {
        offset_ms: lag as f64 / fs * 1000.0,
        peak_correlation,
        correlation_curve: curve,
    })
}

/// Finds the kinematics-vs-EMG offset: correlates the per-time-step maximum
/// move command across channels against the maximum absolute joint velocity,
/// sweeping lags within `+/- max_lag_ms` (paper default 1000 ms).
///
/// The kinematics track is resampled onto the EMG clock first if the rates
/// differ.
pub fn find_offset(
    rec: &EmgRecording,
    kin: &KinematicsTrack,
    max_lag_ms: f64,
) -> Result<SyncResult> {
    let mv = move_command(rec)?;
    let n = mv.ncols();
    let command: Vec<f64> = (0..n)
        .map(|i| mv.column(i).iter().fold(0.0f64, |m, &v| m.max(v)))
        .collect();
    let kin_rs = if (kin.fs - rec.fs).abs() > 1e-9 {
        crate::signal::resample_linear(kin, rec.fs)?
    } else {
        kin.clone()
    };
    let speed = joint_speed(&kin_rs)?;
    find_offset_traces(&command, &speed, rec.fs, max_lag_ms)
}

#[cfg(test)]
mod tests;
