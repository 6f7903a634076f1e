use super::loss::huber_loss;
use super::model::{NeuralModel, TargetStats};
use super::Adam;
use crate::error::{Error, Result};
use crate::rng::component_rng;
use ndarray::{s, Array1, Array2, Array3};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// One training sample: a feature sequence, its joint-angle target at the
/// end of the sequence context, and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CmtsSample {
    /// `[seq_len x feat_dim]`.
    pub features: Array2<f64>,
    /// Joint angles in degrees.
    pub target: Array1<f64>,
    /// (subject id, sample index of the context end in the source signal).
    pub origin: (String, usize),
}

/// Packed sample storage: `x` is `[n, seq_len, feat_dim]`, `y` is
/// `[n, n_joints]`. Origins are kept for leakage assertions.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub x: Array3<f64>,
    pub y: Array2<f64>,
    pub origins: Vec<(String, usize)>,
}

impl SampleSet {
    pub fn from_samples(samples: &[CmtsSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty sample set".into()));
        }
        let (t, d) = samples[0].features.dim();
        let j = samples[0].target.len();
        let mut x = Array3::zeros((samples.len(), t, d));
        let mut y = Array2::zeros((samples.len(), j));
        let mut origins = Vec::with_capacity(samples.len());
        for (i, sm) in samples.iter().enumerate() {
            if sm.features.dim() != (t, d) || sm.target.len() != j {
                return Err(Error::ShapeMismatch(format!("sample {i} has inconsistent shape")));
            }
            x.slice_mut(s![i, .., ..]).assign(&sm.features);
            y.row_mut(i).assign(&sm.target);
            origins.push(sm.origin.clone());
        }
        Ok(Self { x, y, origins })
    }

    pub fn len(&self) -> usize {
        self.x.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let (_, t, d) = self.x.dim();
        let j = self.y.ncols();
        let mut x = Array3::zeros((idx.len(), t, d));
        let mut y = Array2::zeros((idx.len(), j));
        let mut origins = Vec::with_capacity(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            x.slice_mut(s![k, .., ..]).assign(&self.x.slice(s![i, .., ..]));
            y.row_mut(k).assign(&self.y.row(i));
            origins.push(self.origins[i].clone());
        }
        Self { x, y, origins }
    }

    /// Features flattened to `[n, seq_len * feat_dim]` (for non-recurrent
    /// models).
    pub fn x_flat(&self) -> Array2<f64> {
        let (n, t, d) = self.x.dim();
        self.x.to_shape((n, t * d)).unwrap().to_owned()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub patience: usize,
    pub huber_delta: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Standardize targets per joint with train-set stats before the loss;
    /// predictions are de-standardized.
    pub standardize_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 256,
            clip_norm: 1.0,
            patience: 20,
            huber_delta: 1.0,
            max_epochs: 200,
            seed: 0,
            standardize_targets: true,
        }
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Largest post-clip gradient norm observed over all steps.
    pub max_applied_grad_norm: f64,
}

/// Trains `model` in place with mini-batch Adam, Huber loss, global-norm
/// clipping, and early stopping on the validation loss; the weights of the
/// best validation epoch are restored before returning.
pub fn train(
    model: &mut NeuralModel,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidInput("train and validation sets must be non-empty".into()));
    }
    if cfg.patience == 0 {
        return Err(Error::Config("patience must be >= 1".into()));
    }
    let target_stats = if cfg.standardize_targets {
        Some(TargetStats::from_targets(&train_set.y))
    } else {
        None
    };
    let y_train = match &target_stats {
        Some(ts) => ts.standardize(&train_set.y),
        None => train_set.y.clone(),
    };
    let y_val = match &target_stats {
        Some(ts) => ts.standardize(&val_set.y),
        None => val_set.y.clone(),
    };
    model.target_stats = target_stats;

    let mut params = model.params_flat();
    let mut adam = Adam::new(params.len(), cfg.learning_rate, cfg.clip_norm);
    let mut shuffle_rng = component_rng(cfg.seed, "train/shuffle");
    let mut dropout_rng = component_rng(cfg.seed, "train/dropout");

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainingLog {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        max_applied_grad_norm: 0.0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut epochs_since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (bx, by) = gather(train_set, &y_train, chunk);
            let (pred, caches) = model.forward(&bx, Some(&mut dropout_rng))?;
            let (loss, dout) = huber_loss(&pred, &by, cfg.huber_delta);
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("NaN/Inf loss at epoch {epoch}")));
            }
            epoch_loss += loss;
            n_batches += 1;
            let grads = model.backward(&dout, &caches);
            let mut grad_flat = Vec::with_capacity(params.len());
            for g in &grads {
                g.collect_params(&mut grad_flat);
            }
            let applied = adam.step(&mut params, &mut grad_flat);
            log.max_applied_grad_norm = log.max_applied_grad_norm.max(applied);
            model.set_params_flat(&params);
        }
        log.train_loss.push(epoch_loss / n_batches.max(1) as f64);

        let val = eval_loss(model, val_set, &y_val, cfg)?;
        log.val_loss.push(val);
        if val < best_val {
            best_val = val;
            best_params.copy_from_slice(&params);
            log.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    model.set_params_flat(&best_params);
    Ok(log)
}

fn gather(set: &SampleSet, y_std: &Array2<f64>, idx: &[usize]) -> (Array3<f64>, Array2<f64>) {
    let (_, t, d) = set.x.dim();
    let j = y_std.ncols();
    let mut bx = Array3::zeros((idx.len(), t, d));
    let mut by = Array2::zeros((idx.len(), j));
    for (k, &i) in idx.iter().enumerate() {
        bx.slice_mut(s![k, .., ..]).assign(&set.x.slice(s![i, .., ..]));
        by.row_mut(k).assign(&y_std.row(i));
    }
    (bx, by)
}

fn eval_loss(
    model: &NeuralModel,
    set: &SampleSet,
    y_std: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let n = set.len();
    let mut start = 0;
    while start < n {
        let end = (start + cfg.batch_size).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let (bx, by) = gather(set, y_std, &idx);
        let (pred, _) = model.forward(&bx, None)?;
        let (loss, _) = huber_loss(&pred, &by, cfg.huber_delta);
        total += loss * (end - start) as f64;
        count += end - start;
        start = end;
    }
    Ok(total / count as f64)
}

/// Batched deterministic prediction in degrees.
pub fn predict(model: &NeuralModel, set: &SampleSet) -> Result<Array2<f64>> {
    let n = set.len();
    let mut out = Array2::zeros((n, model.n_joints));
    let mut start = 0;
    while start < n {
        let end = (start + 256).min(n);
        let bx = set.x.slice(s![start..end, .., ..]).to_owned();
        let pred = model.predict(&bx)?;
        out.slice_mut(s![start..end, ..]).assign(&pred);
        start = end;
    }
    Ok(out)
}
