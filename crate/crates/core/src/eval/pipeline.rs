//! Session-to-sample plumbing shared by the evaluation protocols.
//!
//! Window covariances depend only on the signal, so they are computed once
//! per session; anything fitted on training data (tangent references,
//! feature standardization) is recomputed per fold and applied to all
//! windows.

use crate::data::Session;
use crate::error::{Error, Result};
use crate::neural::{tdf_features, CmtsSample, SampleSet, TdfThresholds};
use crate::riemann::{band_window_covariances, project_windows, FeatureConfig, SpdMatrix,
    WindowCovariances};
use crate::signal::{sliding_windows, standardize_per_channel, ChannelStats};
use ndarray::{s, Array1, Array2};

/// Which per-window representation feeds the model.
#[derive(Debug, Clone)]
pub enum FeatureKind {
    Cmts(FeatureConfig),
    Tdf { win_ms: f64, step_ms: f64, seq_len: usize, thresholds: TdfThresholds },
}

impl FeatureKind {
    pub fn seq_len(&self) -> usize {
        match self {
            FeatureKind::Cmts(c) => c.seq_len,
            FeatureKind::Tdf { seq_len, .. } => *seq_len,
        }
    }

    pub fn win_step_ms(&self) -> (f64, f64) {
        match self {
            FeatureKind::Cmts(c) => (c.win_ms, c.step_ms),
            FeatureKind::Tdf { win_ms, step_ms, .. } => (*win_ms, *step_ms),
        }
    }

    pub fn feat_dim(&self, n_channels: usize) -> usize {
        match self {
            FeatureKind::Cmts(c) => c.feat_dim(n_channels),
            FeatureKind::Tdf { .. } => 7 * n_channels,
        }
    }
}

/// Fold-independent per-session state.
pub struct PreparedSession {
    pub subject_id: String,
    /// `[start, end)` sample span of each window.
    pub windows: Vec<(usize, usize)>,
    pub covs: Option<WindowCovariances>,
    /// Raw (unstandardized) TDF features per window.
    pub tdf_raw: Option<Array2<f64>>,
    /// Joint angles at each window's final sample, `[n_windows x n_joints]`.
    pub targets: Array2<f64>,
    pub seq_len: usize,
    pub emg_stats: ChannelStats,
    pub fs: f64,
}

pub fn prepare_session(session: &Session, kind: &FeatureKind) -> Result<PreparedSession> {
    session.validate()?;
    let (emg_std, emg_stats) = standardize_per_channel(&session.emg, None)?;
    let (win_ms, step_ms) = kind.win_step_ms();
    let (windows, covs, tdf_raw) = match kind {
        FeatureKind::Cmts(cfg) => {
            let wc = band_window_covariances(&emg_std, cfg)?;
            (wc.windows.clone(), Some(wc), None)
        }
        FeatureKind::Tdf { thresholds, .. } => {
            let windows = sliding_windows(win_ms, step_ms, emg_std.n_samples(), emg_std.fs);
            let mut rows = Vec::with_capacity(windows.len());
            for &(a, b) in &windows {
                rows.push(tdf_features(emg_std.data.slice(s![.., a..b]), *thresholds)?);
            }
            let d = rows.first().map(|r| r.len()).unwrap_or(0);
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let m = Array2::from_shape_vec((flat.len() / d.max(1), d.max(1)), flat)
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            (windows, None, Some(m))
        }
    };
    if windows.len() < kind.seq_len() {
        return Err(Error::InsufficientData(format!(
            "session yields {} windows but one sequence needs {}",
            windows.len(),
            kind.seq_len()
        )));
    }
    let n_joints = session.kin.n_joints();
    let mut targets = Array2::zeros((windows.len(), n_joints));
    for (w, &(_, end)) in windows.iter().enumerate() {
        for j in 0..n_joints {
            targets[(w, j)] = session.kin.angles[(j, end - 1)];
        }
    }
    Ok(PreparedSession {
        subject_id: session.subject_id.clone(),
        windows,
        covs,
        tdf_raw,
        targets,
        seq_len: kind.seq_len(),
        emg_stats,
        fs: session.emg.fs,
    })
}

impl PreparedSession {
    /// Number of full sequences (samples).
    pub fn n_sequences(&self) -> usize {
        self.windows.len() + 1 - self.seq_len
    }

    /// Window indices making up sequence `i`.
    pub fn sequence_windows(&self, i: usize) -> std::ops::Range<usize> {
        i..i + self.seq_len
    }

    /// `[start, end)` sample span the sequence's features depend on.
    pub fn context_span(&self, i: usize) -> (usize, usize) {
        (self.windows[i].0, self.windows[i + self.seq_len - 1].1)
    }

    /// Packs the selected sequences into a sample set using per-window
    /// features `feats` (`[n_windows x d]`).
    pub fn build_sample_set(&self, feats: &Array2<f64>, idx: &[usize]) -> Result<SampleSet> {
        let samples: Vec<CmtsSample> = idx
            .iter()
            .map(|&i| {
                let last = i + self.seq_len - 1;
                CmtsSample {
                    features: feats.slice(s![i..=last, ..]).to_owned(),
                    target: Array1::from_iter(self.targets.row(last).iter().copied()),
                    origin: (self.subject_id.clone(), self.windows[last].1),
                }
            })
            .collect();
        SampleSet::from_samples(&samples)
    }
}

/// Training-fitted part of the feature map.
#[derive(Debug, Clone)]
pub enum FittedFeatures {
    Cmts { refs: Vec<SpdMatrix> },
    Tdf { mean: Vec<f64>, std: Vec<f64> },
}

/// Per-window feature matrix for one session, fitted on `train_windows` of
/// (possibly) several sessions. For CMTS the references must come from
/// training windows only; for TDF the standardization statistics.
pub fn fit_features_single(
    prep: &PreparedSession,
    train_windows: &[usize],
) -> Result<(Array2<f64>, FittedFeatures)> {
    match (&prep.covs, &prep.tdf_raw) {
        (Some(wc), _) => {
            let refs = wc.reference_means(train_windows)?;
            let feats = project_windows(wc, &refs)?;
            Ok((feats, FittedFeatures::Cmts { refs }))
        }
        (None, Some(raw)) => {
            let (mean, std) = tdf_stats(raw, train_windows)?;
            let feats = apply_tdf_stats(raw, &mean, &std);
            Ok((feats, FittedFeatures::Tdf { mean, std }))
        }
        _ => unreachable!("prepared session carries covariances or TDF rows"),
    }
}

/// Applies already-fitted feature parameters to a session's windows.
pub fn apply_features(prep: &PreparedSession, fitted: &FittedFeatures) -> Result<Array2<f64>> {
    match (fitted, &prep.covs, &prep.tdf_raw) {
        (FittedFeatures::Cmts { refs }, Some(wc), _) => project_windows(wc, refs),
        (FittedFeatures::Tdf { mean, std }, _, Some(raw)) => Ok(apply_tdf_stats(raw, mean, std)),
        _ => Err(Error::InvalidInput(
            "fitted feature kind does not match the prepared session".into(),
        )),
    }
}

/// Pooled fit across several sessions (LOSO): Karcher means over all
/// training windows, or pooled TDF statistics.
pub fn fit_features_pooled(
    preps: &[&PreparedSession],
) -> Result<FittedFeatures> {
    if preps.is_empty() {
        return Err(Error::InvalidInput("no training sessions".into()));
    }
    if let Some(first) = &preps[0].covs {
        let n_bands = first.n_bands();
        let mut refs = Vec::with_capacity(n_bands);
        for b in 0..n_bands {
            let mut pool: Vec<SpdMatrix> = Vec::new();
            for p in preps {
                let wc = p.covs.as_ref().ok_or_else(|| {
                    Error::InvalidInput("mixed feature kinds across sessions".into())
                })?;
                pool.extend(wc.covs[b].iter().cloned());
            }
            refs.push(crate::riemann::geometric_mean(&pool, 1e-8, 50)?.mean);
        }
        Ok(FittedFeatures::Cmts { refs })
    } else {
        let d = preps[0].tdf_raw.as_ref().unwrap().ncols();
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let mut count = 0usize;
        for p in preps {
            let raw = p.tdf_raw.as_ref().ok_or_else(|| {
                Error::InvalidInput("mixed feature kinds across sessions".into())
            })?;
            for row in raw.rows() {
                for (k, &v) in row.iter().enumerate() {
                    sum[k] += v;
                    sum_sq[k] += v * v;
                }
            }
            count += raw.nrows();
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = sum_sq
            .iter()
            .zip(&mean)
            .map(|(&sq, &m)| {
                let v = (sq / n - m * m).max(0.0).sqrt();
                if v > 0.0 { v } else { 1.0 }
            })
            .collect();
        Ok(FittedFeatures::Tdf { mean, std })
    }
}

fn tdf_stats(raw: &Array2<f64>, train_windows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if train_windows.is_empty() {
        return Err(Error::InvalidInput("no training windows for TDF statistics".into()));
    }
    let n = train_windows.len() as f64;
    let d = raw.ncols();
    let mut mean = vec![0.0; d];
    for &w in train_windows {
        for (k, &v) in raw.row(w).iter().enumerate() {
            mean[k] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; d];
    for &w in train_windows {
        for (k, &v) in raw.row(w).iter().enumerate() {
            std[k] += (v - mean[k]) * (v - mean[k]);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok((mean, std))
}

fn apply_tdf_stats(raw: &Array2<f64>, mean: &[f64], std: &[f64]) -> Array2<f64> {
    let mut out = raw.clone();
    for mut row in out.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[k]) / std[k];
        }
    }
    out
}
