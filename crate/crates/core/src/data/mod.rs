//! Session persistence, dataset import, hand-landmark geometry, and the
//! synthetic coupled EMG/kinematics generator.
//!
//! A session is one subject's paired recording. On disk it is a directory:
//!
//! ```text
//! session/
//!   meta.json   subject id, sampling rates, channel/joint names, sync
//!               offset, provenance
//!   emg.bin     u32 LE n_rows, u32 LE n_cols, then rows*cols f32 LE values,
//!               channel-major (row = channel)
//!   kin.bin     same layout, row = joint, angles in degrees
//! ```
//!
//! Arrays are stored as 32-bit floats; in-memory signals are quantized to
//! f32 on save, so a save/load round-trip is bit-exact.

mod landmarks;
mod synth;

#[cfg(test)]
mod tests;

pub use landmarks::{angles_from_landmarks, LandmarkAngles};
pub use synth::{default_coupling, generate_synthetic, SynthConfig};

use crate::error::{Error, Result};
use crate::signal::{EmgRecording, KinematicsTrack};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Real,
    Synthetic { config: SynthConfig },
}

/// One subject's paired EMG + kinematics recording on a shared clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub emg: EmgRecording,
    pub kin: KinematicsTrack,
    pub subject_id: String,
    /// Offset found by synchronization and already applied to `kin`, if any.
    pub sync_offset_ms: Option<f64>,
    pub provenance: Provenance,
}

impl Session {
    pub fn new(
        emg: EmgRecording,
        kin: KinematicsTrack,
        subject_id: String,
        provenance: Provenance,
    ) -> Result<Self> {
        let s = Self { emg, kin, subject_id, sync_offset_ms: None, provenance };
        s.validate()?;
        Ok(s)
    }

    /// Shared-clock invariants: equal rates and sample counts.
    pub fn validate(&self) -> Result<()> {
        if (self.emg.fs - self.kin.fs).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "EMG at {} Hz but kinematics at {} Hz; resample before building a session",
                self.emg.fs, self.kin.fs
            )));
        }
        if self.emg.n_samples() != self.kin.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "EMG has {} samples, kinematics {}",
                self.emg.n_samples(),
                self.kin.n_samples()
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.emg.duration_s()
    }

    /// Applies a synchronization offset by shifting the kinematics onto the
    /// EMG clock. Refuses to apply twice.
    pub fn apply_offset(&mut self, offset_ms: f64) -> Result<()> {
        if self.sync_offset_ms.is_some() {
            return Err(Error::InvalidInput(
                "session already synchronized; offset can be applied once".into(),
            ));
        }
        self.kin = shift_kinematics(&self.kin, -offset_ms);
        self.sync_offset_ms = Some(offset_ms);
        Ok(())
    }
}

/// Delays (positive ms) or advances (negative) a track on its own clock,
/// holding the edge values.
pub fn shift_kinematics(kin: &KinematicsTrack, offset_ms: f64) -> KinematicsTrack {
    let shift = (offset_ms / 1000.0 * kin.fs).round() as i64;
    let n = kin.n_samples() as i64;
    let angles = Array2::from_shape_fn(kin.angles.dim(), |(j, i)| {
        let src = (i as i64 - shift).clamp(0, n - 1);
        kin.angles[(j, src as usize)]
    });
    KinematicsTrack { angles, fs: kin.fs, joint_names: kin.joint_names.clone() }
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionMeta {
    subject_id: String,
    emg_fs: f64,
    kin_fs: f64,
    channel_names: Vec<String>,
    joint_names: Vec<String>,
    sync_offset_ms: Option<f64>,
    provenance: Provenance,
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&(m.nrows() as u32).to_le_bytes())?;
    f.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for row in m.rows() {
        for &v in row {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let bad = |detail: String| Error::Malformed { path: path.display().to_string(), detail };
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut h = [0u8; 8];
    f.read_exact(&mut h).map_err(|_| bad("truncated dimension header".into()))?;
    let rows = u32::from_le_bytes(h[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(h[4..8].try_into().unwrap()) as usize;
    let expected = rows * cols * 4;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() != expected {
        return Err(bad(format!(
            "expected {rows}x{cols} f32 payload ({expected} bytes), found {} bytes",
            buf.len()
        )));
    }
    let values: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite values in payload".into()));
    }
    Ok(Array2::from_shape_vec((rows, cols), values).unwrap())
}

pub fn save_session(session: &Session, dir: &Path) -> Result<()> {
    session.validate()?;
    std::fs::create_dir_all(dir)?;
    let meta = SessionMeta {
        subject_id: session.subject_id.clone(),
        emg_fs: session.emg.fs,
        kin_fs: session.kin.fs,
        channel_names: session.emg.channel_names.clone(),
        joint_names: session.kin.joint_names.clone(),
        sync_offset_ms: session.sync_offset_ms,
        provenance: session.provenance.clone(),
    };
    let json = serde_json::to_vec_pretty(&meta)
        .map_err(|e| Error::Config(format!("meta serialization: {e}")))?;
    std::fs::write(dir.join("meta.json"), json)?;
    write_matrix(&dir.join("emg.bin"), &session.emg.data)?;
    write_matrix(&dir.join("kin.bin"), &session.kin.angles)?;
    Ok(())
}

pub fn load_session(dir: &Path) -> Result<Session> {
    let meta_path = dir.join("meta.json");
    let bad = |detail: String| Error::Malformed { path: meta_path.display().to_string(), detail };
    let meta: SessionMeta = serde_json::from_slice(&std::fs::read(&meta_path)?)
        .map_err(|e| bad(format!("meta parse: {e}")))?;
    let emg_data = read_matrix(&dir.join("emg.bin"))?;
    let kin_data = read_matrix(&dir.join("kin.bin"))?;
    if emg_data.nrows() != meta.channel_names.len() {
        return Err(bad(format!(
            "emg.bin has {} channels but meta names {}",
            emg_data.nrows(),
            meta.channel_names.len()
        )));
    }
    if kin_data.nrows() != meta.joint_names.len() {
        return Err(bad(format!(
            "kin.bin has {} joints but meta names {}",
            kin_data.nrows(),
            meta.joint_names.len()
        )));
    }
    let emg = EmgRecording::new(emg_data, meta.emg_fs, meta.channel_names)?;
    let kin = KinematicsTrack::new(kin_data, meta.kin_fs, meta.joint_names)?;
    let session = Session {
        emg,
        kin,
        subject_id: meta.subject_id,
        sync_offset_ms: meta.sync_offset_ms,
        provenance: meta.provenance,
    };
    session.validate()?;
    Ok(session)
}

/// Quantizes a matrix to f32 precision so that saving is lossless.
pub(crate) fn quantize_f32(m: &mut Array2<f64>) {
    m.mapv_inplace(|v| v as f32 as f64);
}

/// Adapter interface for foreign dataset layouts. `import_emgfk` walks the
/// registered adapters and uses the first whose `detect` accepts the path.
pub trait ArchiveAdapter {
    fn name(&self) -> &'static str;
    fn detect(&self, path: &Path) -> bool;
    fn import(&self, path: &Path) -> Result<Vec<Session>>;
}

/// Adapter for archives already laid out as a directory of canonical
/// session directories (one per subject).
pub struct CanonicalDirAdapter;

impl ArchiveAdapter for CanonicalDirAdapter {
    fn name(&self) -> &'static str {
        "canonical-dir"
    }

    fn detect(&self, path: &Path) -> bool {
        session_dirs(path).map(|d| !d.is_empty()).unwrap_or(false)
    }

    fn import(&self, path: &Path) -> Result<Vec<Session>> {
        let mut sessions = Vec::new();
        for dir in session_dirs(path)? {
            sessions.push(load_session(&dir)?);
        }
        Ok(sessions)
    }
}

fn session_dirs(path: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let p = entry?.path();
        if p.is_dir() && p.join("meta.json").exists() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Imports the public EMG-Finger-Kinematics archive into canonical
/// sessions. The published archive layout is resolved through the
/// [`ArchiveAdapter`] interface; unknown layouts produce an explicit error
/// instead of a guess.
pub fn import_emgfk(archive: &Path) -> Result<Vec<Session>> {
    if !archive.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("archive path {} does not exist", archive.display()),
        )));
    }
    let adapters: [&dyn ArchiveAdapter; 1] = [&CanonicalDirAdapter];
    for adapter in adapters {
        if adapter.detect(archive) {
            return adapter.import(archive);
        }
    }
    Err(Error::UnsupportedLayout(format!(
        "no adapter recognizes {}; add an implementation of data::ArchiveAdapter \
         for this archive layout",
        archive.display()
    )))
}
