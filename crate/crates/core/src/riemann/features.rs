use super::spd::{
    covariance, geometric_mean, symmetric_to_vector, tangent_project, Shrinkage, SpdMatrix,
};
use crate::error::{Error, Result};
use crate::signal::{bandpass, sliding_windows, BandSpec, EmgRecording};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Configuration of the covariance tangent-space feature pipeline.
///
/// `refilter = false` skips the per-band filtering step; use it for the
/// simplified single-band variant where the acquisition band-pass already
/// covers the requested band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub bands: Vec<BandSpec>,
    pub refilter: bool,
    pub shrinkage: Shrinkage,
    pub seq_len: usize,
    pub win_ms: f64,
    pub step_ms: f64,
}

impl FeatureConfig {
    /// Three-band configuration: 5-40, 40-80, 80-150 Hz, sequences of ten
    /// 300 ms windows stepping 100 ms.
    pub fn multiband() -> Self {
        Self {
            bands: vec![
                BandSpec::new(5.0, 40.0),
                BandSpec::new(40.0, 80.0),
                BandSpec::new(80.0, 150.0),
            ],
            refilter: true,
            shrinkage: Shrinkage::LedoitWolf,
            seq_len: 10,
            win_ms: 300.0,
            step_ms: 100.0,
        }
    }

    /// Single full-band configuration (5-150 Hz) without per-band
    /// refiltering.
    pub fn simplified() -> Self {
        Self {
            bands: vec![BandSpec::new(5.0, 150.0)],
            refilter: false,
            shrinkage: Shrinkage::LedoitWolf,
            seq_len: 10,
            win_ms: 300.0,
            step_ms: 100.0,
        }
    }

    /// Tangent feature dimension per window for `n_channels`.
    pub fn feat_dim(&self, n_channels: usize) -> usize {
        self.bands.len() * n_channels * (n_channels + 1) / 2
    }

    /// Samples of context one sequence needs.
    pub fn context_samples(&self, fs: f64) -> usize {
        let win = (self.win_ms * fs / 1000.0).round() as usize;
        let step = (self.step_ms * fs / 1000.0).round() as usize;
        (self.seq_len - 1) * step + win
    }

    pub fn context_ms(&self) -> f64 {
        (self.seq_len - 1) as f64 * self.step_ms + self.win_ms
    }
}

/// Per-band covariance matrices for every sliding window of a recording.
/// Covariances depend only on the signal, not on the tangent reference, so
/// they are computed once and re-projected per cross-validation fold.
#[derive(Debug, Clone)]
pub struct WindowCovariances {
    /// `[start, end)` sample ranges, one per window.
    pub windows: Vec<(usize, usize)>,
    /// `covs[band][window]`.
    pub covs: Vec<Vec<SpdMatrix>>,
}

impl WindowCovariances {
    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn n_bands(&self) -> usize {
        self.covs.len()
    }

    /// Geometric means of the covariances at `window_idx` (training windows
    /// only in cross-validation), one reference per band.
    pub fn reference_means(&self, window_idx: &[usize]) -> Result<Vec<SpdMatrix>> {
        if window_idx.is_empty() {
            return Err(Error::InvalidInput("no windows selected for reference mean".into()));
        }
        self.covs
            .iter()
            .map(|band| {
                let sel: Vec<SpdMatrix> =
                    window_idx.iter().map(|&i| band[i].clone()).collect();
                Ok(geometric_mean(&sel, 1e-8, 50)?.mean)
            })
            .collect()
    }
}

/// Computes per-band covariances for all sliding windows of `rec`.
pub fn band_window_covariances(
    rec: &EmgRecording,
    cfg: &FeatureConfig,
) -> Result<WindowCovariances> {
    let windows = sliding_windows(cfg.win_ms, cfg.step_ms, rec.n_samples(), rec.fs);
    let mut covs = Vec::with_capacity(cfg.bands.len());
    for band in &cfg.bands {
        let filtered = if cfg.refilter { bandpass(rec, *band, false)? } else { rec.clone() };
        let mut band_covs = Vec::with_capacity(windows.len());
        for &(s, e) in &windows {
            band_covs.push(covariance(
                filtered.data.slice(ndarray::s![.., s..e]),
                cfg.shrinkage,
            )?);
        }
        covs.push(band_covs);
    }
    Ok(WindowCovariances { windows, covs })
}

/// Projects every window covariance into the tangent space at the per-band
/// references; output is `[n_windows x n_bands * n(n+1)/2]` with bands
/// concatenated per window.
pub fn project_windows(wc: &WindowCovariances, refs: &[SpdMatrix]) -> Result<Array2<f64>> {
    if refs.len() != wc.n_bands() {
        return Err(Error::ShapeMismatch(format!(
            "{} references for {} bands",
            refs.len(),
            wc.n_bands()
        )));
    }
    if wc.n_windows() == 0 {
        return Err(Error::InsufficientData("no windows to project".into()));
    }
    let n = wc.covs[0][0].dim();
    let tan_dim = n * (n + 1) / 2;
    let mut out = Array2::zeros((wc.n_windows(), wc.n_bands() * tan_dim));
    let whiteners: Vec<DMatrix<f64>> = refs.iter().map(|g| g.inv_sqrt()).collect();
    for (b, band_covs) in wc.covs.iter().enumerate() {
        let w = &whiteners[b];
        for (i, c) in band_covs.iter().enumerate() {
            let whitened = w * c.matrix() * w;
            let whitened = (&whitened + whitened.transpose()) * 0.5;
            let eig = SymmetricEigen::new(whitened);
            let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let floor = 1e-12 * max.max(f64::MIN_POSITIVE);
            let logs: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(floor).ln()).collect();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(logs));
            let s = &eig.eigenvectors * d * eig.eigenvectors.transpose();
            let v = symmetric_to_vector(&((&s + s.transpose()) * 0.5));
            for (k, val) in v.into_iter().enumerate() {
                out[[i, b * tan_dim + k]] = val;
            }
        }
    }
    Ok(out)
}

/// Extracts one CMTS sequence (`seq_len x feat_dim`) from the trailing
/// windows of `rec`, projecting at the given per-band references. Errors if
/// the recording is shorter than the required context.
pub fn extract_cmts_sequence(
    rec: &EmgRecording,
    cfg: &FeatureConfig,
    refs: &[SpdMatrix],
) -> Result<Array2<f64>> {
    let needed = cfg.context_samples(rec.fs);
    if rec.n_samples() < needed {
        return Err(Error::InsufficientData(format!(
            "CMTS sequence needs {:.0} ms of context ({needed} samples at {} Hz), got {}",
            cfg.context_ms(),
            rec.fs,
            rec.n_samples()
        )));
    }
    let wc = band_window_covariances(rec, cfg)?;
    let all = project_windows(&wc, refs)?;
    let n_windows = wc.n_windows();
    Ok(all.slice(ndarray::s![n_windows - cfg.seq_len.., ..]).to_owned())
}

/// Feature vector for the trailing window of `rec` (the streaming /
/// per-sample path; also what the timing benchmark times).
///
/// Streaming uses causal single-pass band filters, and an IIR filter needs
/// warm-up before its output over the window is valid, so when the config
/// refilters, pass the window together with its preceding context; the whole
/// input is filtered per band and the covariance is taken over the last
/// `win_ms`. Without refiltering only the window itself is needed.
pub fn streaming_window_features(
    rec: &EmgRecording,
    cfg: &FeatureConfig,
    refs: &[SpdMatrix],
) -> Result<Vec<f64>> {
    let win = (cfg.win_ms * rec.fs / 1000.0).round() as usize;
    if rec.n_samples() < win {
        return Err(Error::InsufficientData(format!(
            "streaming window needs {win} samples at {} Hz, got {}",
            rec.fs,
            rec.n_samples()
        )));
    }
    let start = rec.n_samples() - win;
    let mut out = Vec::with_capacity(cfg.feat_dim(rec.n_channels()));
    for (band, g) in cfg.bands.iter().zip(refs) {
        let c = if cfg.refilter {
            let filtered = bandpass(rec, *band, true)?;
            covariance(filtered.data.slice(ndarray::s![.., start..]), cfg.shrinkage)?
        } else {
            covariance(rec.data.slice(ndarray::s![.., start..]), cfg.shrinkage)?
        };
        out.extend(tangent_project(&c, g)?.v);
    }
    Ok(out)
}
