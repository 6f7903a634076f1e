//! Joint angles from 21-point hand landmarks.
//!
//! Landmark topology (standard hand model): index 0 is the wrist; each
//! finger occupies four consecutive indices from 1 (thumb) to 20 (pinky
//! tip): MCP, PIP, DIP, tip. The 15 tracked angles are, per finger, the
//! relative angles at the MCP, PIP, and DIP joints:
//!
//! | joint | triplet (a, b, c)    |
//! |-------|----------------------|
//! | MCP   | wrist, MCP, PIP      |
//! | PIP   | MCP, PIP, DIP        |
//! | DIP   | PIP, DIP, tip        |
//!
//! angle(b) = arccos( (a-b)·(c-b) / |a-b||c-b| ) in degrees, 0..180.
//! Finger order matches `signal::default_joint_names`.

use crate::error::{Error, Result};
use crate::signal::{default_joint_names, KinematicsTrack};
use ndarray::{Array2, ArrayView3};

pub const N_LANDMARKS: usize = 21;

/// Result of the geometric conversion, with degenerate-frame accounting.
#[derive(Debug, Clone)]
pub struct LandmarkAngles {
    pub track: KinematicsTrack,
    /// Frames where a triplet was degenerate (coincident points) and the
    /// angle was linearly in-filled from its neighbors.
    pub infilled: usize,
}

fn triplets() -> [(usize, usize, usize); 15] {
    let mut out = [(0, 0, 0); 15];
    for f in 0..5 {
        let base = 1 + 4 * f;
        out[3 * f] = (0, base, base + 1); // MCP
        out[3 * f + 1] = (base, base + 1, base + 2); // PIP
        out[3 * f + 2] = (base + 1, base + 2, base + 3); // DIP
    }
    out
}

/// Converts a landmark sequence `[n_frames x 21 x 3]` at `fs` Hz into the
/// 15-joint angle track. Degenerate triplets yield NaN for that frame and
/// are linearly in-filled along time (edge frames take the nearest valid
/// value); the in-fill count is reported.
pub fn angles_from_landmarks(frames: ArrayView3<'_, f64>, fs: f64) -> Result<LandmarkAngles> {
    let (n_frames, n_pts, n_dims) = frames.dim();
    if n_pts != N_LANDMARKS || n_dims != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected [frames x {N_LANDMARKS} x 3] landmarks, got [{n_frames} x {n_pts} x {n_dims}]"
        )));
    }
    if n_frames == 0 {
        return Err(Error::InsufficientData("no landmark frames".into()));
    }
    if frames.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite landmark coordinates".into()));
    }

    let trips = triplets();
    let mut angles = Array2::from_elem((15, n_frames), f64::NAN);
    for t in 0..n_frames {
        for (j, &(a, b, c)) in trips.iter().enumerate() {
            let v = |p: usize, d: usize| frames[(t, p, d)];
            let u = [v(a, 0) - v(b, 0), v(a, 1) - v(b, 1), v(a, 2) - v(b, 2)];
            let w = [v(c, 0) - v(b, 0), v(c, 1) - v(b, 1), v(c, 2) - v(b, 2)];
            let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            let nw = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            if nu < 1e-12 || nw < 1e-12 {
                continue; // degenerate, stays NaN
            }
            let cos = ((u[0] * w[0] + u[1] * w[1] + u[2] * w[2]) / (nu * nw)).clamp(-1.0, 1.0);
            angles[(j, t)] = cos.acos().to_degrees();
        }
    }

    let mut infilled = 0;
    for mut row in angles.rows_mut() {
        infilled += infill_nan(row.as_slice_mut().unwrap())?;
    }

    let track = KinematicsTrack::new(angles, fs, default_joint_names())?;
    Ok(LandmarkAngles { track, infilled })
}

/// Linear in-fill of NaN runs; edges extend the nearest valid value.
/// Returns the number of filled samples.
fn infill_nan(x: &mut [f64]) -> Result<usize> {
    let n = x.len();
    if x.iter().all(|v| v.is_nan()) {
        return Err(Error::InvalidInput(
            "joint angle degenerate in every frame; cannot in-fill".into(),
        ));
    }
    let mut filled = 0;
    let mut i = 0;
    while i < n {
        if !x[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && x[i].is_nan() {
            i += 1;
        }
        let left = start.checked_sub(1).map(|k| x[k]);
        let right = if i < n { Some(x[i]) } else { None };
        for k in start..i {
            x[k] = match (left, right) {
                (Some(l), Some(r)) => {
                    let frac = (k - start + 1) as f64 / (i - start + 1) as f64;
                    l + (r - l) * frac
                }
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("all-NaN handled above"),
            };
            filled += 1;
        }
    }
    Ok(filled)
}
