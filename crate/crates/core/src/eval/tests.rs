use super::*;
use crate::data::{default_coupling, generate_synthetic, Session, SynthConfig};
use crate::error::Error;
use crate::neural::{build_trr_sized, SampleSet, TrainingLog, TrrSizes};
use crate::riemann::{FeatureConfig, Shrinkage};
use crate::rng::component_rng;
use crate::signal::BandSpec;
use ndarray::Array2;
use rand::Rng;
use std::cell::RefCell;
use std::rc::Rc;

fn tiny_session(seed: u64) -> Session {
    generate_synthetic(&SynthConfig {
        n_joints: 3,
        n_channels: 3,
        duration_s: 80.0,
        fs: 100.0,
        coupling: default_coupling(3, 3),
        tonic_gain: 2.0,
        noise: 0.01,
        n_attractors: 6,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn tiny_feature() -> FeatureKind {
    FeatureKind::Cmts(FeatureConfig {
        bands: vec![BandSpec::new(5.0, 45.0)],
        refilter: false,
        shrinkage: Shrinkage::LedoitWolf,
        seq_len: 4,
        win_ms: 300.0,
        step_ms: 100.0,
    })
}

fn ridge_cfg() -> EvalConfig {
    let mut c = EvalConfig::new(tiny_feature(), ModelChoice::Ridge);
    c.seed = 7;
    c
}

// ---- metrics ----

#[test]
fn metrics_match_a_naive_loop() {
    let mut rng = component_rng(3, "test/metric-oracle");
    for _ in 0..100 {
        let n = rng.gen_range(2..50);
        let j = rng.gen_range(1..6);
        let truth = Array2::from_shape_fn((n, j), |_| rng.gen_range(-30.0..30.0));
        let pred = Array2::from_shape_fn((n, j), |_| rng.gen_range(-30.0..30.0));
        let got_nmse = nmse(&pred, &truth).unwrap();
        let got_abs = absolute_error(&pred, &truth).unwrap();
        for c in 0..j {
            let mut mean = 0.0;
            for r in 0..n {
                mean += truth[(r, c)];
            }
            mean /= n as f64;
            let mut var = 0.0;
            let mut mse = 0.0;
            let mut ae = 0.0;
            for r in 0..n {
                var += (truth[(r, c)] - mean).powi(2);
                mse += (pred[(r, c)] - truth[(r, c)]).powi(2);
                ae += (pred[(r, c)] - truth[(r, c)]).abs();
            }
            var /= n as f64;
            mse /= n as f64;
            ae /= n as f64;
            assert!((got_nmse.per_joint[c] - mse / var).abs() < 1e-12);
            assert!((got_abs.per_joint[c] - ae).abs() < 1e-12);
        }
    }
}

#[test]
fn perfect_prediction_scores_zero_and_mean_scores_one() {
    let mut rng = component_rng(4, "test/metric-edges");
    let truth = Array2::from_shape_fn((40, 3), |_| rng.gen_range(0.0..90.0));
    let zero = nmse(&truth, &truth).unwrap();
    assert_eq!(zero.mean, 0.0);
    assert_eq!(absolute_error(&truth, &truth).unwrap().mean, 0.0);

    let mut mean_pred = truth.clone();
    for c in 0..3 {
        let m = truth.column(c).sum() / 40.0;
        mean_pred.column_mut(c).fill(m);
    }
    let one = nmse(&mean_pred, &truth).unwrap();
    for &v in &one.per_joint {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
}

#[test]
fn zero_variance_joints_are_excluded_not_averaged() {
    let mut truth = Array2::zeros((10, 2));
    for r in 0..10 {
        truth[(r, 0)] = r as f64;
        truth[(r, 1)] = 5.0; // constant
    }
    let pred = &truth + 1.0;
    let m = nmse(&pred, &truth).unwrap();
    assert_eq!(m.excluded, vec![1]);
    assert!(m.per_joint[1].is_nan());
    assert!(m.per_joint[0].is_finite());
    assert_eq!(m.mean, m.per_joint[0]);

    let constant = Array2::from_elem((10, 2), 3.0);
    assert!(matches!(
        nmse(&constant.clone(), &constant),
        Err(Error::UndefinedCorrelation(_))
    ));
}

#[test]
fn constant_bias_gives_that_absolute_error() {
    let mut rng = component_rng(14, "test/abs-bias");
    let truth = Array2::from_shape_fn((25, 4), |_| rng.gen_range(0.0..90.0));
    let ae = absolute_error(&(&truth + 5.0), &truth).unwrap();
    for &v in &ae.per_joint {
        assert!((v - 5.0).abs() < 1e-12);
    }
}

#[test]
fn metric_inputs_are_validated() {
    let a = Array2::zeros((4, 2));
    let b = Array2::zeros((4, 3));
    assert!(nmse(&a, &b).is_err());
    let mut c = Array2::from_elem((4, 2), 1.0);
    c[(0, 0)] = f64::NAN;
    assert!(nmse(&c, &a).is_err());
}

// ---- PCA ----

#[test]
fn pca_recovers_a_one_dimensional_line() {
    let mut rng = component_rng(5, "test/pca-line");
    let dir = [0.3, -0.8, 0.5, 0.1];
    let x = Array2::from_shape_fn((60, 4), |(r, c)| {
        let t: f64 = (r as f64) / 10.0 + 0.0 * c as f64;
        t * dir[c] + rng.gen_range(-1e-9..1e-9)
    });
    let p = pca_explained_variance(&x, 0.95).unwrap();
    assert_eq!(p.n_components, 1);
    assert!(p.cumulative_ratio[0] > 0.999999);
}

#[test]
fn pca_cumulative_ratio_is_monotone_and_reaches_one() {
    let mut rng = component_rng(6, "test/pca-random");
    let x = Array2::from_shape_fn((80, 6), |_| rng.gen_range(-1.0..1.0));
    let p = pca_explained_variance(&x, 0.9).unwrap();
    for w in p.cumulative_ratio.windows(2) {
        assert!(w[1] >= w[0] - 1e-15);
    }
    assert!((p.cumulative_ratio.last().unwrap() - 1.0).abs() < 1e-10);
    for w in p.eigenvalues.windows(2) {
        assert!(w[0] >= w[1]);
    }
    assert!(pca_explained_variance(&x, 0.0).is_err());
    assert!(pca_explained_variance(&x.slice(ndarray::s![..1, ..]).to_owned(), 0.9).is_err());
}

#[test]
fn isotropic_noise_needs_almost_all_components() {
    let mut rng = component_rng(15, "test/pca-iso");
    let x = Array2::from_shape_fn((4000, 15), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let p = pca_explained_variance(&x, 0.9).unwrap();
    assert_eq!(p.n_components, 14, "cumulative {:?}", p.cumulative_ratio);
}

// ---- fold structure ----

#[test]
fn fold_boundaries_partition_everything() {
    for n in [20usize, 97, 100, 103] {
        let b = fold_boundaries(n, 10);
        assert_eq!(b[0], 0);
        assert_eq!(*b.last().unwrap(), n);
        for w in b.windows(2) {
            assert!(w[1] > w[0], "empty fold in {b:?}");
        }
    }
}

// ---- protocol oracles ----

struct PerfectOracle;

impl Regressor for PerfectOracle {
    fn fit(&mut self, _: &SampleSet, _: &SampleSet) -> crate::error::Result<Option<TrainingLog>> {
        Ok(None)
    }
    fn predict(&self, set: &SampleSet) -> crate::error::Result<Array2<f64>> {
        Ok(set.y.clone())
    }
}

#[test]
fn oracle_regressor_scores_zero_nmse() {
    let session = tiny_session(1);
    let cfg = ridge_cfg();
    let factory = |_: usize, _: usize, _: u64| -> Box<dyn Regressor> { Box::new(PerfectOracle) };
    let out = intra_subject_cv_with(&session, &cfg, &factory, 1.0).unwrap();
    assert_eq!(out.folds.len(), 10);
    assert_eq!(out.pooled_nmse.mean, 0.0);
    assert_eq!(out.pooled_abs.mean, 0.0);
}

struct RecordingOracle {
    rec: Rc<RefCell<Vec<Vec<(String, usize)>>>>,
}

impl Regressor for RecordingOracle {
    fn fit(
        &mut self,
        train: &SampleSet,
        val: &SampleSet,
    ) -> crate::error::Result<Option<TrainingLog>> {
        let mut all = train.origins.clone();
        all.extend(val.origins.iter().cloned());
        self.rec.borrow_mut().push(all);
        Ok(None)
    }
    fn predict(&self, set: &SampleSet) -> crate::error::Result<Array2<f64>> {
        Ok(set.y.clone())
    }
}

#[test]
fn training_contexts_never_touch_the_test_fold() {
    let session = tiny_session(2);
    let cfg = ridge_cfg();
    let rec: Rc<RefCell<Vec<Vec<(String, usize)>>>> = Rc::new(RefCell::new(Vec::new()));
    let rec2 = rec.clone();
    let factory = move |_: usize, _: usize, _: u64| -> Box<dyn Regressor> {
        Box::new(RecordingOracle { rec: rec2.clone() })
    };
    intra_subject_cv_with(&session, &cfg, &factory, 1.0).unwrap();

    let prep = prepare_session(&session, &cfg.feature).unwrap();
    let n_seq = prep.n_sequences();
    // map a sample origin (context end sample) back to its sequence index
    let end_to_seq: std::collections::HashMap<usize, usize> =
        (0..n_seq).map(|i| (prep.context_span(i).1, i)).collect();
    let bounds = fold_boundaries(n_seq, cfg.k_folds);
    let folds = rec.borrow();
    assert_eq!(folds.len(), cfg.k_folds);
    for (f, origins) in folds.iter().enumerate() {
        let test: Vec<usize> = (bounds[f]..bounds[f + 1]).collect();
        let lo = test.iter().map(|&i| prep.context_span(i).0).min().unwrap();
        let hi = test.iter().map(|&i| prep.context_span(i).1).max().unwrap();
        for (_, end) in origins {
            let i = end_to_seq[end];
            assert!(!test.contains(&i), "fold {f} trained on its own test sequence");
            let (a, b) = prep.context_span(i);
            assert!(b <= lo || a >= hi, "fold {f}: training context [{a},{b}) overlaps [{lo},{hi})");
        }
    }
}

#[test]
fn ridge_cv_beats_the_mean_predictor() {
    let out = intra_subject_cv(&tiny_session(3), &ridge_cfg()).unwrap();
    assert!(out.pooled_nmse.mean < 0.95, "pooled NMSE {}", out.pooled_nmse.mean);
    assert_eq!(out.predictions.nrows(), out.truths.nrows());
}

#[test]
fn sweep_fraction_one_reproduces_the_full_protocol() {
    let session = tiny_session(4);
    let cfg = ridge_cfg();
    let full = intra_subject_cv(&session, &cfg).unwrap();
    let sweep = training_duration_sweep(&session, &[1.0, 0.4], &cfg).unwrap();
    assert_eq!(sweep[0].outcome.predictions, full.predictions);
    assert_eq!(sweep[0].outcome.pooled_nmse, full.pooled_nmse);
    assert!((sweep[1].fraction - 0.4).abs() < 1e-12);
}

#[test]
fn smaller_fractions_train_on_fewer_sequences() {
    let session = tiny_session(5);
    let cfg = ridge_cfg();
    let rec: Rc<RefCell<Vec<Vec<(String, usize)>>>> = Rc::new(RefCell::new(Vec::new()));
    let rec2 = rec.clone();
    let factory = move |_: usize, _: usize, _: u64| -> Box<dyn Regressor> {
        Box::new(RecordingOracle { rec: rec2.clone() })
    };
    intra_subject_cv_with(&session, &cfg, &factory, 1.0).unwrap();
    let full: Vec<usize> = rec.borrow().iter().map(|o| o.len()).collect();
    rec.borrow_mut().clear();
    intra_subject_cv_with(&session, &cfg, &factory, 0.5).unwrap();
    let half: Vec<usize> = rec.borrow().iter().map(|o| o.len()).collect();
    for (a, b) in full.iter().zip(&half) {
        assert!(*b < *a, "half fraction used {b} of {a} sequences");
    }
}

#[test]
fn less_training_data_scores_worse() {
    let session = tiny_session(16);
    let cfg = ridge_cfg();
    let pts = training_duration_sweep(&session, &[0.1, 1.0], &cfg).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(
        pts[0].outcome.pooled_nmse.mean > pts[1].outcome.pooled_nmse.mean,
        "10% of the data scored {} vs {} at 100%",
        pts[0].outcome.pooled_nmse.mean,
        pts[1].outcome.pooled_nmse.mean
    );
}

#[test]
fn cross_subject_decoding_is_harder_than_intra() {
    let sessions: Vec<Session> = (20..23).map(tiny_session).collect();
    let cfg = ridge_cfg();
    let loso = loso_cv(&sessions, &cfg).unwrap();
    let intra = intra_subject_cv(&sessions[0], &cfg).unwrap();
    let loso_first = loso
        .folds
        .iter()
        .find(|f| f.subject == sessions[0].subject_id)
        .unwrap();
    assert!(
        loso_first.nmse.mean > intra.pooled_nmse.mean,
        "LOSO {} vs intra {}",
        loso_first.nmse.mean,
        intra.pooled_nmse.mean
    );
}

#[test]
fn loso_holds_each_subject_out_once() {
    let sessions: Vec<Session> = (10..13).map(tiny_session).collect();
    let out = loso_cv(&sessions, &ridge_cfg()).unwrap();
    assert_eq!(out.folds.len(), 3);
    let mut subjects: Vec<&str> = out.folds.iter().map(|f| f.subject.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    assert_eq!(subjects.len(), 3);
    assert!(loso_cv(&sessions[..2], &ridge_cfg()).is_err());
}

#[test]
fn offset_sweep_echoes_offsets() {
    let session = tiny_session(6);
    let pts = offset_sweep_eval(&session, &[0.0, 400.0], &ridge_cfg()).unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[0].offset_ms, 0.0);
    assert_eq!(pts[1].offset_ms, 400.0);
    assert!(pts[1].outcome.pooled_nmse.mean.is_finite());
}

#[test]
fn bad_protocol_configs_are_rejected() {
    let session = tiny_session(7);
    let mut cfg = ridge_cfg();
    cfg.k_folds = 1;
    assert!(intra_subject_cv(&session, &cfg).is_err());
    let mut cfg = ridge_cfg();
    cfg.val_fraction = 0.9;
    assert!(intra_subject_cv(&session, &cfg).is_err());
    let cfg = ridge_cfg();
    let factory = |_: usize, _: usize, _: u64| -> Box<dyn Regressor> { Box::new(PerfectOracle) };
    assert!(intra_subject_cv_with(&session, &cfg, &factory, 0.0).is_err());
    assert!(intra_subject_cv_with(&session, &cfg, &factory, 1.5).is_err());
}

// ---- timing ----

#[test]
fn timing_benchmark_reports_the_requested_iterations() {
    let session = tiny_session(8);
    let fc = match tiny_feature() {
        FeatureKind::Cmts(c) => c,
        _ => unreachable!(),
    };
    let feat_dim = fc.feat_dim(3);
    let sizes = TrrSizes { dense_in: 8, gru1: 8, gru2: 6, dense_out: 6, dropout: 0.0, seq_len: 4 };
    let model = build_trr_sized(feat_dim, 3, 0, &sizes);
    let r = timing_benchmark(&session, &fc, Some(&model), 25).unwrap();
    assert_eq!(r.feature.n, 25);
    assert!(r.feature.mean_ms > 0.0);
    let inf = r.inference.as_ref().unwrap();
    assert_eq!(inf.n, 25);
    assert!(r.total_mean_ms() >= r.feature.mean_ms);
    assert!(timing_benchmark(&session, &fc, None, 0).is_err());

    // two consecutive runs agree on the mean within 50%
    let a = timing_benchmark(&session, &fc, None, 50).unwrap().feature.mean_ms;
    let b = timing_benchmark(&session, &fc, None, 50).unwrap().feature.mean_ms;
    assert!((a - b).abs() <= 0.5 * a.max(b), "{a} vs {b} ms");
}

// ---- report ----

#[test]
fn report_groups_absolute_error_by_finger() {
    let session = tiny_session(9);
    let out = intra_subject_cv(&session, &ridge_cfg()).unwrap();
    let names = vec!["index_mcp".to_string(), "index_pip".into(), "thumb_mcp".into()];
    let report = EvalReport::new("intra", names, out, "seed=7".into()).unwrap();
    let fingers = report.per_finger_abs();
    assert_eq!(fingers.len(), 2);
    assert_eq!(fingers[0].0, "index");
    assert_eq!(fingers[1].0, "thumb");
    let expected = (report.outcome.pooled_abs.per_joint[0]
        + report.outcome.pooled_abs.per_joint[1])
        / 2.0;
    assert!((fingers[0].1 - expected).abs() < 1e-12);

    let csv = report.to_csv();
    assert!(csv.starts_with("fold,subject,n_test,"));
    assert_eq!(csv.lines().count(), 11);
    let pj = report.per_joint_csv();
    assert_eq!(pj.lines().count(), 4);
    assert!(report.to_human().contains("normalized by the test set"));

    let wrong = vec!["only_one".to_string()];
    assert!(EvalReport::new("intra", wrong, report.outcome.clone(), String::new()).is_err());
}
