//! Model artifact persistence.
//!
//! One file per trained model:
//!
//! ```text
//! bytes 0..8    magic "EMGDECM1"
//! bytes 8..12   format version, u32 little-endian (currently 1)
//! bytes 12..20  header length H, u64 little-endian
//! bytes 20..20+H  JSON header: model kind, layer shapes, feature-pipeline
//!                 metadata (bands, reference SPD matrices, standardization
//!                 stats), training log, seeds, config echo
//! remainder     all parameter tensors as little-endian IEEE-754 f64, in
//!               layer order, each tensor row-major (the exact order of
//!               `NeuralModel::params_flat`, or w / x_mean / y_mean for the
//!               ridge model)
//! ```
//!
//! The tensor count is implied by the shapes in the header; loading
//! validates the byte count and round-trips bit-exactly.

use super::layers::{Activation, Dense, Gru, Layer};
use super::model::{NeuralModel, TargetStats};
use super::ridge::RidgeModel;
use super::train::TrainingLog;
use crate::error::{Error, Result};
use crate::riemann::{FeatureConfig, SpdMatrix};
use crate::signal::ChannelStats;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"EMGDECM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Trr,
    TrrSimplified,
    MlpCmts,
    MlpTdf,
    Ridge,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Trr => "trr",
            ModelKind::TrrSimplified => "trr-simplified",
            ModelKind::MlpCmts => "mlp-cmts",
            ModelKind::MlpTdf => "mlp-tdf",
            ModelKind::Ridge => "ridge",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trr" => Ok(ModelKind::Trr),
            "trr-simplified" => Ok(ModelKind::TrrSimplified),
            "mlp-cmts" => Ok(ModelKind::MlpCmts),
            "mlp-tdf" => Ok(ModelKind::MlpTdf),
            "ridge" => Ok(ModelKind::Ridge),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// How raw EMG turns into model inputs; frozen at train time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturePipeline {
    Cmts {
        cfg: FeatureConfig,
        /// Per-band tangent reference matrices (training-set geometric
        /// means).
        refs: Vec<SpdMatrix>,
    },
    Tdf {
        win_ms: f64,
        step_ms: f64,
        seq_len: usize,
        ssc_eps: f64,
        wamp_theta: f64,
        /// Per-feature standardization from the training set.
        feat_mean: Vec<f64>,
        feat_std: Vec<f64>,
    },
}

/// Everything needed to run the model on new EMG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub pipeline: FeaturePipeline,
    /// Per-channel EMG standardization applied before features.
    pub emg_stats: Option<ChannelStats>,
    pub n_channels: usize,
    pub fs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Neural(NeuralModel),
    Ridge(RidgeModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub kind: ModelKind,
    pub model: TrainedModel,
    pub meta: PipelineMeta,
    pub seed: u64,
    pub log: Option<TrainingLog>,
    /// Verbatim echo of the run configuration that produced the model.
    pub config_echo: Option<String>,
    pub tool_version: String,
}

// --- header (tensor-free) descriptions ---

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerSpec {
    Dense { d_in: usize, d_out: usize, act: Activation },
    Gru { d_in: usize, units: usize },
    Dropout { rate: f64 },
    TakeLast,
    Flatten,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
enum ModelShape {
    Neural {
        layers: Vec<LayerSpec>,
        feat_dim: usize,
        seq_len: usize,
        n_joints: usize,
        init_seed: u64,
        target_stats: Option<TargetStats>,
    },
    Ridge {
        d: usize,
        n_joints: usize,
        lambda: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    shape: ModelShape,
    meta: PipelineMeta,
    seed: u64,
    log: Option<TrainingLog>,
    config_echo: Option<String>,
    tool_version: String,
}

fn layer_spec(l: &Layer, d_in: usize) -> LayerSpec {
    match l {
        Layer::Dense(d) => LayerSpec::Dense { d_in: d.w.nrows(), d_out: d.w.ncols(), act: d.act },
        Layer::Gru(g) => LayerSpec::Gru { d_in: g.wx.nrows(), units: g.units },
        Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
        Layer::TakeLast => LayerSpec::TakeLast,
        Layer::Flatten => {
            let _ = d_in;
            LayerSpec::Flatten
        }
    }
}

fn build_layer(spec: &LayerSpec) -> Layer {
    match spec {
        LayerSpec::Dense { d_in, d_out, act } => Layer::Dense(Dense {
            w: Array2::zeros((*d_in, *d_out)),
            b: Array1::zeros(*d_out),
            act: *act,
        }),
        LayerSpec::Gru { d_in, units } => Layer::Gru(Gru {
            wx: Array2::zeros((*d_in, 3 * units)),
            wh: Array2::zeros((*units, 3 * units)),
            b: Array1::zeros(3 * units),
            units: *units,
        }),
        LayerSpec::Dropout { rate } => Layer::Dropout { rate: *rate },
        LayerSpec::TakeLast => Layer::TakeLast,
        LayerSpec::Flatten => Layer::Flatten,
    }
}

impl ModelArtifact {
    fn tensors_flat(&self) -> Vec<f64> {
        match &self.model {
            TrainedModel::Neural(m) => m.params_flat(),
            TrainedModel::Ridge(r) => {
                let mut v: Vec<f64> = r.w.iter().copied().collect();
                v.extend(r.x_mean.iter());
                v.extend(r.y_mean.iter());
                v
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let shape = match &self.model {
            TrainedModel::Neural(m) => ModelShape::Neural {
                layers: m.layers.iter().map(|l| layer_spec(l, 0)).collect(),
                feat_dim: m.feat_dim,
                seq_len: m.seq_len,
                n_joints: m.n_joints,
                init_seed: m.init_seed,
                target_stats: m.target_stats.clone(),
            },
            TrainedModel::Ridge(r) => ModelShape::Ridge {
                d: r.w.nrows(),
                n_joints: r.w.ncols(),
                lambda: r.lambda,
            },
        };
        let header = Header {
            kind: self.kind,
            shape,
            meta: self.meta.clone(),
            seed: self.seed,
            log: self.log.clone(),
            config_echo: self.config_echo.clone(),
            tool_version: self.tool_version.clone(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Config(format!("header serialization: {e}")))?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&FORMAT_VERSION.to_le_bytes())?;
        f.write_all(&(header_json.len() as u64).to_le_bytes())?;
        f.write_all(&header_json)?;
        for v in self.tensors_flat() {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let bad = |detail: &str| Error::Malformed {
            path: path.display().to_string(),
            detail: detail.to_string(),
        };
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut v4 = [0u8; 4];
        f.read_exact(&mut v4).map_err(|_| bad("truncated version"))?;
        let version = u32::from_le_bytes(v4);
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let mut l8 = [0u8; 8];
        f.read_exact(&mut l8).map_err(|_| bad("truncated header length"))?;
        let hlen = u64::from_le_bytes(l8) as usize;
        let mut hbuf = vec![0u8; hlen];
        f.read_exact(&mut hbuf).map_err(|_| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&hbuf)
            .map_err(|e| bad(&format!("header parse: {e}")))?;

        let mut blob = Vec::new();
        f.read_to_end(&mut blob)?;
        if blob.len() % 8 != 0 {
            return Err(bad("tensor blob not a multiple of 8 bytes"));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let model = match &header.shape {
            ModelShape::Neural { layers, feat_dim, seq_len, n_joints, init_seed, target_stats } => {
                let mut m = NeuralModel {
                    layers: layers.iter().map(build_layer).collect(),
                    feat_dim: *feat_dim,
                    seq_len: *seq_len,
                    n_joints: *n_joints,
                    init_seed: *init_seed,
                    target_stats: target_stats.clone(),
                };
                if values.len() != m.n_params() {
                    return Err(bad(&format!(
                        "expected {} tensor values ({} bytes), got {} ({} bytes)",
                        m.n_params(),
                        m.n_params() * 8,
                        values.len(),
                        blob.len()
                    )));
                }
                m.set_params_flat(&values);
                TrainedModel::Neural(m)
            }
            ModelShape::Ridge { d, n_joints, lambda } => {
                let expected = d * n_joints + d + n_joints;
                if values.len() != expected {
                    return Err(bad(&format!(
                        "expected {expected} tensor values ({} bytes), got {} ({} bytes)",
                        expected * 8,
                        values.len(),
                        blob.len()
                    )));
                }
                let (w_vals, rest) = values.split_at(d * n_joints);
                let (xm, ym) = rest.split_at(*d);
                TrainedModel::Ridge(RidgeModel {
                    w: Array2::from_shape_vec((*d, *n_joints), w_vals.to_vec()).unwrap(),
                    x_mean: Array1::from_vec(xm.to_vec()),
                    y_mean: Array1::from_vec(ym.to_vec()),
                    lambda: *lambda,
                })
            }
        };

        Ok(ModelArtifact {
            kind: header.kind,
            model,
            meta: header.meta,
            seed: header.seed,
            log: header.log,
            config_echo: header.config_echo,
            tool_version: header.tool_version,
        })
    }
}
