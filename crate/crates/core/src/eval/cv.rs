//! Evaluation protocols: intra-subject k-fold cross-validation (contiguous,
//! unshuffled folds), leave-one-subject-out, and the training-duration sweep.
//!
//! Folds are contiguous in time and a guard drops every training sequence
//! whose feature context overlaps the test fold's sample span, so no test
//! sample leaks into training through a shared window.

use super::metrics::{absolute_error, nmse, AbsError, Nmse};
use super::pipeline::{
    apply_features, fit_features_pooled, fit_features_single, prepare_session, FeatureKind,
    PreparedSession,
};
use crate::data::Session;
use crate::error::{Error, Result};
use crate::neural::{
    build_mlp, build_trr_sized, predict, ridge_fit, train, NeuralModel, RidgeModel, SampleSet,
    TrainConfig, TrainingLog, TrrSizes,
};
use crate::rng::{component_rng, derive_seed};
use ndarray::{s, Array2};
use rand::Rng;

/// Which regressor the protocol trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Trr,
    Mlp,
    Ridge,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub feature: FeatureKind,
    pub model: ModelChoice,
    pub train: TrainConfig,
    /// Layer widths for the sequence regressor (None = paper-scale defaults).
    pub trr_sizes: Option<TrrSizes>,
    pub k_folds: usize,
    /// Fraction of the training sequences held out for early stopping.
    pub val_fraction: f64,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl EvalConfig {
    pub fn new(feature: FeatureKind, model: ModelChoice) -> Self {
        Self {
            feature,
            model,
            train: TrainConfig::default(),
            trr_sizes: None,
            k_folds: 10,
            val_fraction: 0.10,
            lambda_grid: crate::neural::default_lambda_grid(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.k_folds)));
        }
        if !(0.0 < self.val_fraction && self.val_fraction < 0.5) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 0.5)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// A regressor the protocols can fit and query. Implemented by the trained
/// models; tests plug in oracles through [`intra_subject_cv_with`].
pub trait Regressor {
    fn fit(&mut self, train: &SampleSet, val: &SampleSet) -> Result<Option<TrainingLog>>;
    fn predict(&self, set: &SampleSet) -> Result<Array2<f64>>;
}

/// Builds a fresh regressor per fold from (feat_dim, n_joints, fold seed).
pub type RegressorFactory<'a> = dyn Fn(usize, usize, u64) -> Box<dyn Regressor> + 'a;

struct NeuralRegressor {
    model: Option<NeuralModel>,
    choice: ModelChoice,
    sizes: TrrSizes,
    train_cfg: TrainConfig,
    feat_dim: usize,
    n_joints: usize,
    seed: u64,
}

impl Regressor for NeuralRegressor {
    fn fit(&mut self, train_set: &SampleSet, val_set: &SampleSet) -> Result<Option<TrainingLog>> {
        let mut model = match self.choice {
            ModelChoice::Trr => {
                build_trr_sized(self.feat_dim, self.n_joints, self.seed, &self.sizes)
            }
            ModelChoice::Mlp => {
                build_mlp(self.feat_dim, train_set.x.dim().1, self.n_joints, self.seed)
            }
            ModelChoice::Ridge => unreachable!(),
        };
        let mut cfg = self.train_cfg.clone();
        cfg.seed = self.seed;
        let log = train(&mut model, train_set, val_set, &cfg)?;
        self.model = Some(model);
        Ok(Some(log))
    }

    fn predict(&self, set: &SampleSet) -> Result<Array2<f64>> {
        let model = self.model.as_ref().ok_or_else(|| {
            Error::InvalidInput("regressor queried before fitting".into())
        })?;
        predict(model, set)
    }
}

struct RidgeRegressor {
    model: Option<RidgeModel>,
    lambda_grid: Vec<f64>,
}

impl Regressor for RidgeRegressor {
    fn fit(&mut self, train_set: &SampleSet, val_set: &SampleSet) -> Result<Option<TrainingLog>> {
        self.model = Some(ridge_fit(train_set, val_set, &self.lambda_grid)?);
        Ok(None)
    }

    fn predict(&self, set: &SampleSet) -> Result<Array2<f64>> {
        let model = self.model.as_ref().ok_or_else(|| {
            Error::InvalidInput("regressor queried before fitting".into())
        })?;
        Ok(model.predict(set))
    }
}

fn default_factory(cfg: &EvalConfig) -> Box<dyn Fn(usize, usize, u64) -> Box<dyn Regressor> + '_> {
    let choice = cfg.model;
    let sizes = cfg.trr_sizes.clone().unwrap_or_default();
    let train_cfg = cfg.train.clone();
    let lambda_grid = cfg.lambda_grid.clone();
    Box::new(move |feat_dim, n_joints, seed| -> Box<dyn Regressor> {
        match choice {
            ModelChoice::Ridge => {
                Box::new(RidgeRegressor { model: None, lambda_grid: lambda_grid.clone() })
            }
            _ => Box::new(NeuralRegressor {
                model: None,
                choice,
                sizes: sizes.clone(),
                train_cfg: train_cfg.clone(),
                feat_dim,
                n_joints,
                seed,
            }),
        }
    })
}

/// Result of one fold (intra-subject) or one held-out subject (LOSO).
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub subject: String,
    pub nmse: Nmse,
    pub abs: AbsError,
    pub n_test: usize,
    pub log: Option<TrainingLog>,
}

/// Full protocol outcome: per-fold metrics plus the concatenated test-set
/// predictions (in temporal order for intra-subject CV).
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    pub predictions: Array2<f64>,
    pub truths: Array2<f64>,
    pub pooled_nmse: Nmse,
    pub pooled_abs: AbsError,
}

impl CvOutcome {
    /// Mean and population standard deviation of the per-fold mean NMSE.
    pub fn nmse_mean_std(&self) -> (f64, f64) {
        let vals: Vec<f64> = self.folds.iter().map(|f| f.nmse.mean).collect();
        mean_std(&vals)
    }

    pub fn abs_mean_std(&self) -> (f64, f64) {
        let vals: Vec<f64> = self.folds.iter().map(|f| f.abs.mean).collect();
        mean_std(&vals)
    }
}

pub(crate) fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Contiguous k-fold boundaries over `n` items: fold f is `[b[f], b[f+1])`.
pub fn fold_boundaries(n: usize, k: usize) -> Vec<usize> {
    (0..=k).map(|f| f * n / k).collect()
}

/// Intra-subject cross-validation with contiguous, unshuffled folds.
pub fn intra_subject_cv(session: &Session, cfg: &EvalConfig) -> Result<CvOutcome> {
    intra_subject_cv_with(session, cfg, &default_factory(cfg), 1.0)
}

/// Same protocol with a caller-supplied regressor factory and a training
/// duration fraction (1.0 = use all eligible training sequences).
pub fn intra_subject_cv_with(
    session: &Session,
    cfg: &EvalConfig,
    factory: &RegressorFactory,
    train_fraction: f64,
) -> Result<CvOutcome> {
    cfg.validate()?;
    if !(0.0 < train_fraction && train_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "training fraction {train_fraction} outside (0, 1]"
        )));
    }
    let prep = prepare_session(session, &cfg.feature)?;
    let n_seq = prep.n_sequences();
    if n_seq < cfg.k_folds * 2 {
        return Err(Error::InsufficientData(format!(
            "{n_seq} sequences cannot fill {} folds",
            cfg.k_folds
        )));
    }
    let bounds = fold_boundaries(n_seq, cfg.k_folds);
    let n_joints = prep.targets.ncols();
    let feat_dim = cfg.feature.feat_dim(prep.emg_stats.mean.len());

    let mut folds = Vec::with_capacity(cfg.k_folds);
    let mut predictions = Array2::zeros((n_seq, n_joints));
    let mut truths = Array2::zeros((n_seq, n_joints));

    for f in 0..cfg.k_folds {
        let test_idx: Vec<usize> = (bounds[f]..bounds[f + 1]).collect();
        let test_span = sample_span(&prep, &test_idx);

        // everything outside the fold whose context never touches the fold's
        // samples is eligible for training
        let eligible: Vec<usize> = (0..n_seq)
            .filter(|&i| !test_idx.contains(&i))
            .filter(|&i| {
                let (a, b) = prep.context_span(i);
                b <= test_span.0 || a >= test_span.1
            })
            .collect();
        let (train_idx, val_idx) =
            split_validation(&eligible, cfg.val_fraction, cfg.seed, f, train_fraction)?;

        // feature parameters are fitted on training-side windows only
        let fit_windows = window_union(&prep, train_idx.iter().chain(&val_idx));
        let (feats, _) = fit_features_single(&prep, &fit_windows)?;

        let train_set = prep.build_sample_set(&feats, &train_idx)?;
        let val_set = prep.build_sample_set(&feats, &val_idx)?;
        let test_set = prep.build_sample_set(&feats, &test_idx)?;
        assert_disjoint_origins(&train_set, &test_set);
        assert_disjoint_origins(&val_set, &test_set);

        let fold_seed = derive_seed(cfg.seed, &format!("cv/fold{f}"));
        let mut reg = factory(feat_dim, n_joints, fold_seed);
        let log = reg.fit(&train_set, &val_set)?;
        let pred = reg.predict(&test_set)?;

        let fold_nmse = nmse(&pred, &test_set.y)?;
        let fold_abs = absolute_error(&pred, &test_set.y)?;
        predictions.slice_mut(s![bounds[f]..bounds[f + 1], ..]).assign(&pred);
        truths.slice_mut(s![bounds[f]..bounds[f + 1], ..]).assign(&test_set.y);
        folds.push(FoldResult {
            fold: f,
            subject: prep.subject_id.clone(),
            nmse: fold_nmse,
            abs: fold_abs,
            n_test: test_idx.len(),
            log,
        });
    }

    let pooled_nmse = nmse(&predictions, &truths)?;
    let pooled_abs = absolute_error(&predictions, &truths)?;
    Ok(CvOutcome { folds, predictions, truths, pooled_nmse, pooled_abs })
}

/// Leave-one-subject-out: train on all subjects but one, early-stop on a
/// seeded-randomly chosen training subject, test on the held-out one.
/// Tangent references / feature statistics are pooled over the training
/// subjects only.
pub fn loso_cv(sessions: &[Session], cfg: &EvalConfig) -> Result<CvOutcome> {
    cfg.validate()?;
    if sessions.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "leave-one-subject-out needs at least 3 subjects, got {}",
            sessions.len()
        )));
    }
    let preps: Vec<PreparedSession> = sessions
        .iter()
        .map(|s| prepare_session(s, &cfg.feature))
        .collect::<Result<_>>()?;
    let n_joints = preps[0].targets.ncols();
    let feat_dim = cfg.feature.feat_dim(preps[0].emg_stats.mean.len());

    let mut folds = Vec::with_capacity(preps.len());
    let mut all_pred: Vec<Array2<f64>> = Vec::new();
    let mut all_truth: Vec<Array2<f64>> = Vec::new();

    for held in 0..preps.len() {
        let train_subjects: Vec<usize> = (0..preps.len()).filter(|&i| i != held).collect();
        let mut pick_rng = component_rng(cfg.seed, &format!("loso/val{held}"));
        let val_subject = train_subjects[pick_rng.gen_range(0..train_subjects.len())];

        let pool: Vec<&PreparedSession> = train_subjects.iter().map(|&i| &preps[i]).collect();
        let fitted = fit_features_pooled(&pool)?;

        let full_set = |i: usize| -> Result<SampleSet> {
            let feats = apply_features(&preps[i], &fitted)?;
            let idx: Vec<usize> = (0..preps[i].n_sequences()).collect();
            preps[i].build_sample_set(&feats, &idx)
        };
        let train_sets: Vec<SampleSet> = train_subjects
            .iter()
            .filter(|&&i| i != val_subject)
            .map(|&i| full_set(i))
            .collect::<Result<_>>()?;
        let train_set = concat_sets(&train_sets)?;
        let val_set = full_set(val_subject)?;
        let test_set = full_set(held)?;
        for set in [&train_set, &val_set] {
            assert!(
                set.origins.iter().all(|(s, _)| s != &preps[held].subject_id),
                "held-out subject leaked into training"
            );
        }

        let fold_seed = derive_seed(cfg.seed, &format!("loso/fold{held}"));
        let mut reg = (default_factory(cfg))(feat_dim, n_joints, fold_seed);
        let log = reg.fit(&train_set, &val_set)?;
        let pred = reg.predict(&test_set)?;
        folds.push(FoldResult {
            fold: held,
            subject: preps[held].subject_id.clone(),
            nmse: nmse(&pred, &test_set.y)?,
            abs: absolute_error(&pred, &test_set.y)?,
            n_test: test_set.len(),
            log,
        });
        all_pred.push(pred);
        all_truth.push(test_set.y);
    }

    let predictions = vstack(&all_pred);
    let truths = vstack(&all_truth);
    let pooled_nmse = nmse(&predictions, &truths)?;
    let pooled_abs = absolute_error(&predictions, &truths)?;
    Ok(CvOutcome { folds, predictions, truths, pooled_nmse, pooled_abs })
}

/// One sweep point: the fraction of training data kept and the outcome.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub fraction: f64,
    pub outcome: CvOutcome,
}

/// Re-runs the intra-subject protocol with the training set truncated to
/// leading contiguous fractions. Fraction 1.0 reproduces [`intra_subject_cv`]
/// exactly (same seeds, same folds).
pub fn training_duration_sweep(
    session: &Session,
    fractions: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<SweepPoint>> {
    let factory = default_factory(cfg);
    fractions
        .iter()
        .map(|&f| {
            Ok(SweepPoint {
                fraction: f,
                outcome: intra_subject_cv_with(session, cfg, &factory, f)?,
            })
        })
        .collect()
}

/// One offset-ablation point: injected misalignment and the outcome.
#[derive(Debug, Clone)]
pub struct OffsetPoint {
    pub offset_ms: f64,
    pub outcome: CvOutcome,
}

/// Decoding accuracy as a function of an artificial misalignment between EMG
/// and kinematics: the kinematics are shifted by each offset and the
/// intra-subject protocol re-run. Accuracy should degrade away from zero if
/// synchronization matters.
pub fn offset_sweep_eval(
    session: &Session,
    offsets_ms: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<OffsetPoint>> {
    offsets_ms
        .iter()
        .map(|&off| {
            let mut shifted = session.clone();
            shifted.kin = crate::data::shift_kinematics(&session.kin, off);
            Ok(OffsetPoint { offset_ms: off, outcome: intra_subject_cv(&shifted, cfg)? })
        })
        .collect()
}

/// Smallest sample span covering the given sequences' contexts.
fn sample_span(prep: &PreparedSession, idx: &[usize]) -> (usize, usize) {
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for &i in idx {
        let (a, b) = prep.context_span(i);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}

/// Splits the eligible sequences into train and validation: the validation
/// block is a seeded random contiguous run, and the training remainder is
/// optionally truncated to its leading `train_fraction`.
fn split_validation(
    eligible: &[usize],
    val_fraction: f64,
    seed: u64,
    fold: usize,
    train_fraction: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = eligible.len();
    let n_val = ((n as f64 * val_fraction).ceil() as usize).max(1);
    if n_val + 1 >= n {
        return Err(Error::InsufficientData(format!(
            "{n} eligible sequences cannot supply {n_val} validation and any training"
        )));
    }
    let mut rng = component_rng(seed, &format!("cv/val{fold}"));
    let start = rng.gen_range(0..=n - n_val);
    let val_idx: Vec<usize> = eligible[start..start + n_val].to_vec();
    let mut train_idx: Vec<usize> = eligible[..start]
        .iter()
        .chain(&eligible[start + n_val..])
        .copied()
        .collect();
    let keep = ((train_idx.len() as f64 * train_fraction).round() as usize).max(1);
    train_idx.truncate(keep);
    Ok((train_idx, val_idx))
}

/// Unique window indices used by the given sequences, ascending.
fn window_union<'a>(
    prep: &PreparedSession,
    idx: impl Iterator<Item = &'a usize>,
) -> Vec<usize> {
    let mut used = vec![false; prep.windows.len()];
    for &i in idx {
        for w in prep.sequence_windows(i) {
            used[w] = true;
        }
    }
    used.iter().enumerate().filter(|(_, &u)| u).map(|(w, _)| w).collect()
}

fn assert_disjoint_origins(a: &SampleSet, b: &SampleSet) {
    let b_set: std::collections::HashSet<_> = b.origins.iter().collect();
    assert!(
        a.origins.iter().all(|o| !b_set.contains(o)),
        "train/test sample sets share an origin"
    );
}

fn concat_sets(sets: &[SampleSet]) -> Result<SampleSet> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no sample sets to concatenate".into()));
    }
    let (_, t, d) = sets[0].x.dim();
    let j = sets[0].y.ncols();
    let n: usize = sets.iter().map(|s| s.len()).sum();
    let mut x = ndarray::Array3::zeros((n, t, d));
    let mut y = Array2::zeros((n, j));
    let mut origins = Vec::with_capacity(n);
    let mut at = 0;
    for set in sets {
        let k = set.len();
        x.slice_mut(s![at..at + k, .., ..]).assign(&set.x);
        y.slice_mut(s![at..at + k, ..]).assign(&set.y);
        origins.extend(set.origins.iter().cloned());
        at += k;
    }
    Ok(SampleSet { x, y, origins })
}

fn vstack(mats: &[Array2<f64>]) -> Array2<f64> {
    let cols = mats[0].ncols();
    let rows: usize = mats.iter().map(|m| m.nrows()).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut at = 0;
    for m in mats {
        out.slice_mut(s![at..at + m.nrows(), ..]).assign(m);
        at += m.nrows();
    }
    out
}
