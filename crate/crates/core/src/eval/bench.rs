//! Wall-clock timing of the per-window feature path and model inference.
//!
//! The measured feature path is [`streaming_window_features`]: causally
//! refilter the window's context per band (when the config refilters),
//! estimate the trailing window's covariance, project at the fitted
//! references. Warm-up iterations run first and are excluded.

use crate::data::Session;
use crate::error::{Error, Result};
use crate::neural::{NeuralModel, SampleSet};
use crate::riemann::{band_window_covariances, streaming_window_features, FeatureConfig};
use crate::signal::{standardize_per_channel, EmgRecording};
use ndarray::{s, Array2, Array3};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub n: usize,
}

fn stats_from(durations_ms: &[f64]) -> TimingStats {
    let (mean, std) = super::cv::mean_std(durations_ms);
    TimingStats { mean_ms: mean, std_ms: std, n: durations_ms.len() }
}

#[derive(Debug, Clone)]
pub struct TimingReport {
    pub feature: TimingStats,
    pub inference: Option<TimingStats>,
}

impl TimingReport {
    /// Mean per-window latency of the full decode path.
    pub fn total_mean_ms(&self) -> f64 {
        self.feature.mean_ms + self.inference.as_ref().map_or(0.0, |i| i.mean_ms)
    }
}

const WARMUP: usize = 10;

/// Times the streaming feature extractor over `n_iters` windows of the
/// session (cycling through them), and optionally one-sequence inference of
/// `model`. References are fitted on all windows; this measures speed, not
/// generalization.
pub fn timing_benchmark(
    session: &Session,
    cfg: &FeatureConfig,
    model: Option<&NeuralModel>,
    n_iters: usize,
) -> Result<TimingReport> {
    if n_iters == 0 {
        return Err(Error::InvalidInput("need at least one timing iteration".into()));
    }
    let (emg, _) = standardize_per_channel(&session.emg, None)?;
    let wc = band_window_covariances(&emg, cfg)?;
    if wc.n_windows() < cfg.seq_len {
        return Err(Error::InsufficientData(format!(
            "{} windows cannot form a sequence of {}",
            wc.n_windows(),
            cfg.seq_len
        )));
    }
    let all: Vec<usize> = (0..wc.n_windows()).collect();
    let refs = wc.reference_means(&all)?;

    // Refiltering configs get the window plus its preceding sequence context
    // (a causal band filter must warm up over it); others just the window.
    let win = (cfg.win_ms * emg.fs / 1000.0).round() as usize;
    let span = if cfg.refilter { cfg.context_samples(emg.fs) } else { win };
    let window_rec = |i: usize| -> EmgRecording {
        let (_, b) = wc.windows[i % wc.n_windows()];
        let a = b.saturating_sub(span);
        EmgRecording {
            data: emg.data.slice(s![.., a..b]).to_owned(),
            fs: emg.fs,
            channel_names: emg.channel_names.clone(),
        }
    };

    let mut feat_dim = 0;
    for i in 0..WARMUP {
        feat_dim = streaming_window_features(&window_rec(i), cfg, &refs)?.len();
    }
    let mut feat_ms = Vec::with_capacity(n_iters);
    for i in 0..n_iters {
        let rec = window_rec(i);
        let t0 = Instant::now();
        let v = streaming_window_features(&rec, cfg, &refs)?;
        feat_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(v);
    }

    let inference = match model {
        None => None,
        Some(m) => {
            let x = Array3::zeros((1, cfg.seq_len, feat_dim));
            let set = SampleSet {
                x,
                y: Array2::zeros((1, m.n_joints)),
                origins: vec![("bench".into(), 0)],
            };
            for _ in 0..WARMUP {
                m.predict(&set.x)?;
            }
            let mut ms = Vec::with_capacity(n_iters);
            for _ in 0..n_iters {
                let t0 = Instant::now();
                let p = m.predict(&set.x)?;
                ms.push(t0.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(p);
            }
            Some(stats_from(&ms))
        }
    };

    Ok(TimingReport { feature: stats_from(&feat_ms), inference })
}
