use super::layers::{Activation, Cache, Dense, Gru, Layer};
use crate::error::{Error, Result};
use crate::rng::component_rng;
use ndarray::{Array2, Array3, Axis};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Per-joint affine statistics used to standardize regression targets
/// during training and de-standardize predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TargetStats {
    pub fn from_targets(y: &Array2<f64>) -> Self {
        let n = y.nrows() as f64;
        let mean = y.mean_axis(Axis(0)).unwrap();
        let std = y
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect::<Vec<f64>>();
        Self { mean: mean.to_vec(), std }
    }

    pub fn standardize(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn destandardize(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        out
    }
}

/// A feed-forward / recurrent model: an ordered layer list plus the shape
/// contract it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub layers: Vec<Layer>,
    pub feat_dim: usize,
    pub seq_len: usize,
    pub n_joints: usize,
    pub init_seed: u64,
    /// Present when the model was trained on standardized targets.
    pub target_stats: Option<TargetStats>,
}

impl NeuralModel {
    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            l.collect_params(&mut out);
        }
        out
    }

    pub fn set_params_flat(&mut self, src: &[f64]) {
        let mut cursor = 0;
        for l in &mut self.layers {
            l.set_params(src, &mut cursor);
        }
        debug_assert_eq!(cursor, src.len());
    }

    pub fn grad_mirror(&self) -> Vec<Layer> {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    pub fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        let (_, t, d) = x.dim();
        if t != self.seq_len || d != self.feat_dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects [*, {}, {}], got [*, {t}, {d}]",
                self.seq_len, self.feat_dim
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch `[batch, seq_len, feat_dim]`. With
    /// `train_rng` present, dropout is active; caches for backprop are
    /// always returned. Output is in standardized target units.
    pub fn forward(
        &self,
        x: &Array3<f64>,
        mut train_rng: Option<&mut ChaCha20Rng>,
    ) -> Result<(Array2<f64>, Vec<Cache>)> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (next, cache) = l.forward(&cur, train_rng.as_deref_mut());
            caches.push(cache);
            cur = next;
        }
        let (b, t, d) = cur.dim();
        if t != 1 || d != self.n_joints {
            return Err(Error::ShapeMismatch(format!(
                "model output [*, {t}, {d}], expected [*, 1, {}]",
                self.n_joints
            )));
        }
        Ok((cur.into_shape_with_order((b, d)).unwrap(), caches))
    }

    /// Backward pass: `d_out` is the gradient w.r.t. the model output.
    /// Returns per-layer parameter gradients (same shapes as `layers`).
    pub fn backward(&self, d_out: &Array2<f64>, caches: &[Cache]) -> Vec<Layer> {
        let (b, d) = d_out.dim();
        let mut grads = self.grad_mirror();
        let mut dy = d_out.to_owned().into_shape_with_order((b, 1, d)).unwrap();
        for i in (0..self.layers.len()).rev() {
            dy = self.layers[i].backward(&dy, &caches[i], &mut grads[i]);
        }
        grads
    }

    /// Deterministic inference (dropout off), output de-standardized to
    /// degrees when target statistics are present.
    pub fn predict(&self, x: &Array3<f64>) -> Result<Array2<f64>> {
        let (raw, _) = self.forward(x, None)?;
        Ok(match &self.target_stats {
            Some(ts) => ts.destandardize(&raw),
            None => raw,
        })
    }
}

/// Builds the sequence regressor: time-distributed dense 256 (tanh), two
/// stacked GRU layers of 256 and 128 units (each followed by 10% dropout),
/// last time step, dense 64 (tanh), linear output. Glorot-uniform init from
/// `seed`.
pub fn build_trr(feat_dim: usize, n_joints: usize, seed: u64) -> NeuralModel {
    build_trr_sized(feat_dim, n_joints, seed, &TrrSizes::default())
}

/// Layer widths of the sequence regressor, overridable for desk-scale runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrrSizes {
    pub dense_in: usize,
    pub gru1: usize,
    pub gru2: usize,
    pub dense_out: usize,
    pub dropout: f64,
    pub seq_len: usize,
}

impl Default for TrrSizes {
    fn default() -> Self {
        Self { dense_in: 256, gru1: 256, gru2: 128, dense_out: 64, dropout: 0.10, seq_len: 10 }
    }
}

pub fn build_trr_sized(
    feat_dim: usize,
    n_joints: usize,
    seed: u64,
    sz: &TrrSizes,
) -> NeuralModel {
    let mut rng = component_rng(seed, "init/trr");
    let layers = vec![
        Layer::Dense(Dense::glorot_init(feat_dim, sz.dense_in, Activation::Tanh, &mut rng)),
        Layer::Gru(Gru::glorot_init(sz.dense_in, sz.gru1, &mut rng)),
        Layer::Dropout { rate: sz.dropout },
        Layer::Gru(Gru::glorot_init(sz.gru1, sz.gru2, &mut rng)),
        Layer::Dropout { rate: sz.dropout },
        Layer::TakeLast,
        Layer::Dense(Dense::glorot_init(sz.gru2, sz.dense_out, Activation::Tanh, &mut rng)),
        Layer::Dense(Dense::glorot_init(sz.dense_out, n_joints, Activation::Linear, &mut rng)),
    ];
    NeuralModel {
        layers,
        feat_dim,
        seq_len: sz.seq_len,
        n_joints,
        init_seed: seed,
        target_stats: None,
    }
}

/// Builds the dense baseline: flattened sequence input, hidden layers
/// 256-256-128-64 (tanh), linear output.
pub fn build_mlp(feat_dim: usize, seq_len: usize, n_joints: usize, seed: u64) -> NeuralModel {
    let mut rng = component_rng(seed, "init/mlp");
    let flat = feat_dim * seq_len;
    let widths = [256usize, 256, 128, 64];
    let mut layers = vec![Layer::Flatten];
    let mut d_in = flat;
    for w in widths {
        layers.push(Layer::Dense(Dense::glorot_init(d_in, w, Activation::Tanh, &mut rng)));
        d_in = w;
    }
    layers.push(Layer::Dense(Dense::glorot_init(d_in, n_joints, Activation::Linear, &mut rng)));
    NeuralModel {
        layers,
        feat_dim,
        seq_len,
        n_joints,
        init_seed: seed,
        target_stats: None,
    }
}
