//! Seeded generator of coupled EMG/kinematics sessions.
//!
//! Joint angles dwell at random posture attractors and glide smoothly
//! between them (step targets low-passed to 0-2 Hz content, kept inside
//! [10, 170] degrees). Each EMG channel is a band-limited (15-150 Hz) noise
//! carrier amplitude-modulated by muscle-like drive:
//!
//!   amp_c(t) = baseline
//!            + sum_j coupling[c,j] * |dtheta_j/dt| / 100
//!            + tonic_gain * sum_j tonic[c,j] * bump(theta_j(t))
//!
//! The velocity term encodes movement (the premise the synchronizer relies
//! on); the tonic term gives each channel a Gaussian posture tuning curve
//! (preferred angle per channel/joint), so windows recorded during static
//! holds still carry posture information and angle decoding is learnable.
//! White measurement noise is added on top. Everything derives from the
//! seed.

use super::{quantize_f32, Provenance, Session};
use crate::error::{Error, Result};
use crate::rng::component_rng;
use crate::signal::{
    bandpass, default_joint_names, lowpass_zero_phase, BandSpec, EmgRecording, KinematicsTrack,
};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_joints: usize,
    pub n_channels: usize,
    pub duration_s: f64,
    pub fs: f64,
    /// Non-negative velocity coupling, `[n_channels * n_joints]` row-major.
    pub coupling: Vec<f64>,
    /// Strength of the posture (tonic) amplitude component; 0 disables it.
    pub tonic_gain: f64,
    /// Resting amplitude.
    pub baseline: f64,
    /// Additive white measurement noise level.
    pub noise: f64,
    /// Number of posture attractors the trajectory visits.
    pub n_attractors: usize,
    pub seed: u64,
}

/// Structured default coupling: each channel prefers a sliding subset of
/// joints.
pub fn default_coupling(n_channels: usize, n_joints: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n_channels * n_joints);
    for ch in 0..n_channels {
        for j in 0..n_joints {
            let phase = (ch as f64 / n_channels as f64 - j as f64 / n_joints as f64)
                * std::f64::consts::PI;
            c.push((phase.cos()).max(0.0));
        }
    }
    c
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_joints: 15,
            n_channels: 8,
            duration_s: 120.0,
            fs: 500.0,
            coupling: default_coupling(8, 15),
            tonic_gain: 1.0,
            baseline: 0.1,
            noise: 0.02,
            n_attractors: 8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_joints == 0 || self.n_channels == 0 {
            return Err(Error::Config("need at least one joint and one channel".into()));
        }
        if self.fs <= 0.0 || self.duration_s <= 1.0 {
            return Err(Error::Config(format!(
                "invalid timing: fs {} Hz, duration {} s",
                self.fs, self.duration_s
            )));
        }
        if self.coupling.len() != self.n_channels * self.n_joints {
            return Err(Error::ShapeMismatch(format!(
                "coupling has {} entries, expected {} x {} = {}",
                self.coupling.len(),
                self.n_channels,
                self.n_joints,
                self.n_channels * self.n_joints
            )));
        }
        if self.coupling.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("coupling must be non-negative and finite".into()));
        }
        if self.n_attractors == 0 {
            return Err(Error::Config("need at least one posture attractor".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Session> {
    cfg.validate()?;
    let n = (cfg.duration_s * cfg.fs).round() as usize;
    let (nc, nj) = (cfg.n_channels, cfg.n_joints);

    // posture attractors and dwell schedule
    let mut traj_rng = component_rng(cfg.seed, "synth/trajectory");
    let attractors: Vec<Vec<f64>> = (0..cfg.n_attractors)
        .map(|_| (0..nj).map(|_| traj_rng.gen_range(20.0..160.0)).collect())
        .collect();
    let mut target = Array2::zeros((nj, n));
    let mut t = 0usize;
    let mut current = 0usize;
    while t < n {
        let dwell = (traj_rng.gen_range(1.5..3.5) * cfg.fs) as usize;
        let end = (t + dwell).min(n);
        for j in 0..nj {
            for i in t..end {
                target[(j, i)] = attractors[current][j];
            }
        }
        // never re-draw the current attractor: every dwell is followed by a
        // glide, so no stretch of the session is motionless
        current = if cfg.n_attractors > 1 {
            let next = traj_rng.gen_range(0..cfg.n_attractors - 1);
            if next >= current { next + 1 } else { next }
        } else {
            0
        };
        t = end;
    }

    // smooth the step targets into 0-2 Hz trajectories
    let mut angles = Array2::zeros((nj, n));
    for j in 0..nj {
        let row: Vec<f64> = target.row(j).to_vec();
        let smooth = lowpass_zero_phase(&row, 1.5, cfg.fs)?;
        for (i, &v) in smooth.iter().enumerate() {
            angles[(j, i)] = v.clamp(10.0, 170.0);
        }
    }

    // joint velocities in deg/s
    let dt = 1.0 / cfg.fs;
    let mut speed = Array2::zeros((nj, n));
    for j in 0..nj {
        for i in 1..n - 1 {
            speed[(j, i)] = (angles[(j, i + 1)] - angles[(j, i - 1)]).abs() / (2.0 * dt);
        }
        speed[(j, 0)] = speed[(j, 1)];
        speed[(j, n - 1)] = speed[(j, n - 2)];
    }

    // per-channel posture tuning curves for the tonic component
    let mut tuning_rng = component_rng(cfg.seed, "synth/tuning");
    let tonic_w: Vec<f64> = (0..nc * nj).map(|_| tuning_rng.gen_range(0.0..1.0)).collect();
    let preferred: Vec<f64> = (0..nc * nj).map(|_| tuning_rng.gen_range(30.0..150.0)).collect();
    let sigma = 25.0;

    // band-limited noise carriers
    let mut carrier_rng = component_rng(cfg.seed, "synth/carrier");
    let white = Array2::from_shape_fn((nc, n), |_| carrier_rng.gen_range(-1.0..1.0));
    let carrier_rec = EmgRecording::from_data(white, cfg.fs)?;
    let low = 15.0_f64.min(cfg.fs / 8.0);
    let high = 150.0_f64.min(cfg.fs * 0.45);
    let carriers = bandpass(&carrier_rec, BandSpec::new(low, high), true)?;

    let mut noise_rng = component_rng(cfg.seed, "synth/noise");
    let mut emg = Array2::zeros((nc, n));
    for c in 0..nc {
        for i in 0..n {
            let mut amp = cfg.baseline;
            for j in 0..nj {
                let k = c * nj + j;
                amp += cfg.coupling[k] * speed[(j, i)] / 100.0;
                if cfg.tonic_gain > 0.0 {
                    let d = (angles[(j, i)] - preferred[k]) / sigma;
                    amp += cfg.tonic_gain * tonic_w[k] * (-0.5 * d * d).exp();
                }
            }
            emg[(c, i)] =
                amp * carriers.data[(c, i)] + cfg.noise * noise_rng.gen_range(-1.0..1.0);
        }
    }

    quantize_f32(&mut emg);
    quantize_f32(&mut angles);

    let channel_names = (0..nc).map(|c| format!("emg{c}")).collect();
    let joint_names = if nj == 15 {
        default_joint_names()
    } else {
        (0..nj).map(|j| format!("joint{j}")).collect()
    };
    let session = Session {
        emg: EmgRecording::new(emg, cfg.fs, channel_names)?,
        kin: KinematicsTrack::new(angles, cfg.fs, joint_names)?,
        subject_id: format!("synth-{}", cfg.seed),
        sync_offset_ms: None,
        provenance: Provenance::Synthetic { config: cfg.clone() },
    };
    session.validate()?;
    Ok(session)
}
