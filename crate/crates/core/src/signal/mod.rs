//! Deterministic signal processing for EMG and kinematics streams:
//! band-pass/notch filtering, linear resampling, Hilbert envelopes,
//! common-average referencing, per-channel standardization, and sliding
//! window arithmetic. All operations are pure functions on immutable inputs.

mod filter;
mod hilbert;

pub use filter::{butter_bandpass_sos, butter_lowpass_sos, notch_sos, Sos};
pub use hilbert::hilbert_envelope;

use crate::error::{Error, Result};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// Multi-channel EMG recording: `data` is `[n_channels x n_samples]` in
/// arbitrary sensor units, sampled at `fs` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecording {
    pub data: Array2<f64>,
    pub fs: f64,
    pub channel_names: Vec<String>,
}

impl EmgRecording {
    pub fn new(data: Array2<f64>, fs: f64, channel_names: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("EMG recording must be non-empty".into()));
        }
        if fs <= 0.0 {
            return Err(Error::InvalidInput(format!("sampling rate must be positive, got {fs}")));
        }
        if channel_names.len() != data.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.nrows()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("EMG recording contains NaN/Inf".into()));
        }
        Ok(Self { data, fs, channel_names })
    }

    /// Convenience constructor with generated channel names.
    pub fn from_data(data: Array2<f64>, fs: f64) -> Result<Self> {
        let names = (0..data.nrows()).map(|i| format!("emg{i}")).collect();
        Self::new(data, fs, names)
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }
}

/// Joint-angle time series in degrees: `angles` is `[n_joints x n_samples]`.
/// Joint names are grouped by finger (three joints per finger in the
/// 15-joint layout).
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsTrack {
    pub angles: Array2<f64>,
    pub fs: f64,
    pub joint_names: Vec<String>,
}

impl KinematicsTrack {
    pub fn new(angles: Array2<f64>, fs: f64, joint_names: Vec<String>) -> Result<Self> {
        if angles.nrows() == 0 || angles.ncols() == 0 {
            return Err(Error::InvalidInput("kinematics track must be non-empty".into()));
        }
        if fs <= 0.0 {
            return Err(Error::InvalidInput(format!("sampling rate must be positive, got {fs}")));
        }
        if joint_names.len() != angles.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} joint names for {} joints",
                joint_names.len(),
                angles.nrows()
            )));
        }
        for (j, row) in angles.rows().into_iter().enumerate() {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("joint {j} contains NaN/Inf")));
                }
                if !(0.0..=360.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "joint {j} angle {v} outside [0, 360] degrees"
                    )));
                }
            }
        }
        Ok(Self { angles, fs, joint_names })
    }

    pub fn n_joints(&self) -> usize {
        self.angles.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.angles.ncols()
    }
}

/// Standard 15-joint naming: MCP/PIP/DIP per finger, grouped by finger.
pub fn default_joint_names() -> Vec<String> {
    const FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];
    const JOINTS: [&str; 3] = ["mcp", "pip", "dip"];
    let mut names = Vec::with_capacity(15);
    for f in FINGERS {
        for j in JOINTS {
            names.push(format!("{f}_{j}"));
        }
    }
    names
}

/// A pass band `[low_hz, high_hz]`, validated against Nyquist at use time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandSpec {
    pub fn new(low_hz: f64, high_hz: f64) -> Self {
        Self { low_hz, high_hz }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let nyquist = fs / 2.0;
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < nyquist) {
            return Err(Error::InvalidBand(format!(
                "need 0 < low ({}) < high ({}) < Nyquist ({nyquist})",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }
}

/// Band-pass filters every channel. Butterworth design, order 4 per edge.
/// `causal = false` runs the forward-backward (zero-phase) pass; `causal =
/// true` is a single forward pass with the filter's nonzero group delay.
pub fn bandpass(rec: &EmgRecording, band: BandSpec, causal: bool) -> Result<EmgRecording> {
    band.validate(rec.fs)?;
    let sos = butter_bandpass_sos(4, band.low_hz, band.high_hz, rec.fs)?;
    Ok(EmgRecording {
        data: apply_sos_rows(&rec.data, &sos, causal),
        fs: rec.fs,
        channel_names: rec.channel_names.clone(),
    })
}

/// Notch filters every channel at each frequency (biquad notch, Q = 30),
/// zero-phase.
pub fn notch(rec: &EmgRecording, freqs_hz: &[f64]) -> Result<EmgRecording> {
    let mut data = rec.data.clone();
    for &f in freqs_hz {
        if f <= 0.0 || f >= rec.fs / 2.0 {
            return Err(Error::InvalidBand(format!(
                "notch frequency {f} outside (0, Nyquist = {})",
                rec.fs / 2.0
            )));
        }
        let sos = notch_sos(f, 30.0, rec.fs)?;
        data = apply_sos_rows(&data, &sos, false);
    }
    Ok(EmgRecording { data, fs: rec.fs, channel_names: rec.channel_names.clone() })
}

fn apply_sos_rows(data: &Array2<f64>, sos: &Sos, causal: bool) -> Array2<f64> {
    let mut out = data.clone();
    for mut row in out.rows_mut() {
        let x: Vec<f64> = row.to_vec();
        let y = if causal { sos.filter(&x) } else { sos.filtfilt(&x) };
        for (dst, v) in row.iter_mut().zip(y) {
            *dst = v;
        }
    }
    out
}

/// Resamples a kinematics track with linear interpolation. Values at the
/// original timestamps are reproduced exactly; duration is preserved within
/// one output sample.
pub fn resample_linear(track: &KinematicsTrack, target_fs: f64) -> Result<KinematicsTrack> {
    if target_fs <= 0.0 {
        return Err(Error::InvalidInput(format!("target fs must be positive, got {target_fs}")));
    }
    if track.n_samples() < 2 {
        return Err(Error::InsufficientData(
            "resampling needs at least 2 samples".into(),
        ));
    }
    if (target_fs - track.fs).abs() < 1e-12 {
        return Ok(track.clone());
    }
    let n_in = track.n_samples();
    let last_t = (n_in - 1) as f64 / track.fs;
    let n_out = (last_t * target_fs).floor() as usize + 1;
    let mut out = Array2::zeros((track.n_joints(), n_out));
    for k in 0..n_out {
        let t = k as f64 / target_fs;
        let pos = t * track.fs;
        let i = (pos.floor() as usize).min(n_in - 2);
        let frac = pos - i as f64;
        for j in 0..track.n_joints() {
            let a = track.angles[[j, i]];
            let b = track.angles[[j, i + 1]];
            out[[j, k]] = a + frac * (b - a);
        }
    }
    Ok(KinematicsTrack { angles: out, fs: target_fs, joint_names: track.joint_names.clone() })
}

/// Subtracts the instantaneous cross-channel mean at every time step.
/// Visualization aid only; not part of any feature pipeline.
pub fn common_average_reference(rec: &EmgRecording) -> Result<EmgRecording> {
    if rec.n_channels() < 2 {
        return Err(Error::InvalidInput(
            "common average reference needs at least 2 channels".into(),
        ));
    }
    let mean = rec.data.mean_axis(Axis(0)).unwrap();
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        row -= &mean;
    }
    Ok(EmgRecording { data, fs: rec.fs, channel_names: rec.channel_names.clone() })
}

/// Per-channel mean and standard deviation (population convention, 1/N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn from_recording(rec: &EmgRecording) -> Self {
        let n = rec.n_samples() as f64;
        let mut mean = Vec::with_capacity(rec.n_channels());
        let mut std = Vec::with_capacity(rec.n_channels());
        for row in rec.data.rows() {
            let m = row.sum() / n;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            // degenerate-channel guard
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Self { mean, std }
    }
}

/// Standardizes each channel to zero mean, unit std. When `stats` is given
/// (train-set statistics), the same affine transform is applied instead of
/// recomputing from `rec`.
pub fn standardize_per_channel(
    rec: &EmgRecording,
    stats: Option<&ChannelStats>,
) -> Result<(EmgRecording, ChannelStats)> {
    let stats = match stats {
        Some(s) => {
            if s.mean.len() != rec.n_channels() {
                return Err(Error::ShapeMismatch(format!(
                    "stats for {} channels, recording has {}",
                    s.mean.len(),
                    rec.n_channels()
                )));
            }
            s.clone()
        }
        None => ChannelStats::from_recording(rec),
    };
    let mut data = rec.data.clone();
    for (c, mut row) in data.rows_mut().into_iter().enumerate() {
        let (m, s) = (stats.mean[c], stats.std[c]);
        row.mapv_inplace(|v| (v - m) / s);
    }
    Ok((EmgRecording { data, fs: rec.fs, channel_names: rec.channel_names.clone() }, stats))
}

/// Per-channel analytic-signal magnitude (FFT-based Hilbert transform over
/// the full segment).
pub fn envelope(rec: &EmgRecording) -> Result<EmgRecording> {
    if rec.n_samples() < 8 {
        return Err(Error::InsufficientData(format!(
            "Hilbert envelope needs >= 8 samples, got {}",
            rec.n_samples()
        )));
    }
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        let x: Vec<f64> = row.to_vec();
        let env = hilbert_envelope(&x);
        for (dst, v) in row.iter_mut().zip(env) {
            *dst = v;
        }
    }
    Ok(EmgRecording { data, fs: rec.fs, channel_names: rec.channel_names.clone() })
}

/// Sample-grid sliding windows: `[start, end)` index ranges. A window longer
/// than the signal yields an empty list (not an error).
pub fn sliding_windows(
    length_ms: f64,
    step_ms: f64,
    n_samples: usize,
    fs: f64,
) -> Vec<(usize, usize)> {
    let len = (length_ms * fs / 1000.0).round() as usize;
    let step = (step_ms * fs / 1000.0).round() as usize;
    if len == 0 || step == 0 || len > n_samples {
        return Vec::new();
    }
    let count = (n_samples - len) / step + 1;
    (0..count).map(|i| (i * step, i * step + len)).collect()
}

/// Smooths one channel with a zero-phase low-pass Butterworth (order 2).
pub fn lowpass_zero_phase(x: &[f64], cutoff_hz: f64, fs: f64) -> Result<Vec<f64>> {
    let sos = butter_lowpass_sos(2, cutoff_hz, fs)?;
    Ok(sos.filtfilt(x))
}

/// Centered moving average with window `win` samples (edges shrink the
/// window to what is available).
pub fn moving_average(x: &[f64], win: usize) -> Vec<f64> {
    let n = x.len();
    if win <= 1 || n == 0 {
        return x.to_vec();
    }
    let half = win / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests;
