//! Command-line surface: synthesize, import, synchronize, train, predict,
//! evaluate, ablate, and benchmark.
//!
//! Errors print one machine-parsable line (`error kind=... msg=...`) on
//! stderr followed by human detail, and exit non-zero.

use clap::{Parser, Subcommand};
use emgdecode::config::RunConfig;
use emgdecode::data::{
    generate_synthetic, import_emgfk, load_session, save_session, Provenance, Session,
    SynthConfig,
};
use emgdecode::error::{Error, Result};
use emgdecode::eval::{
    intra_subject_cv, loso_cv, offset_sweep_eval, pca_csv, pca_explained_variance,
    prepare_session, sweep_csv, timing_benchmark, timing_csv, training_duration_sweep,
    EvalReport, FeatureKind,
};
use emgdecode::neural::{
    build_mlp, build_trr_sized, ridge_fit, tdf_features, train, CmtsSample, FeaturePipeline,
    ModelArtifact, ModelKind, PipelineMeta, SampleSet, TrainConfig, TrainedModel,
};
use emgdecode::riemann::{band_window_covariances, project_windows};
use emgdecode::rng::component_rng;
use emgdecode::signal::{sliding_windows, standardize_per_channel, EmgRecording};
use emgdecode::sync::{find_offset, SyncResult, DEFAULT_MAX_LAG_MS};
use ndarray::{s, Array1, Array2};
use rand::Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn tool_version() -> String {
    format!("emgdecode-v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Parser)]
#[command(name = "emgdecode", version, about = "Finger joint angle decoding from surface EMG")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded synthetic session directory.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        joints: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        fs: Option<f64>,
    },
    /// Convert the public EMG-Finger-Kinematics archive into canonical sessions.
    ImportEmgfk {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate (and optionally apply) the EMG/kinematics offset.
    Sync {
        #[arg(long)]
        session: PathBuf,
        /// Also run the offset-injection sweep (decoding accuracy vs misalignment).
        #[arg(long)]
        sweep: bool,
        /// Rewrite the session with the offset applied.
        #[arg(long)]
        apply: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_lag_ms: Option<f64>,
        /// Output file (default: <session>/sync.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump per-window feature vectors for inspection.
    Features {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model on one or more sessions and save the artifact.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model kind when no config file is given.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, required = true, num_args = 1..)]
        session: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode joint angles for a session with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an evaluation protocol and write report files.
    Eval {
        #[command(subcommand)]
        protocol: EvalCmd,
    },
    /// Parameter sweeps reproducing the ablation axes.
    Ablate {
        #[command(subcommand)]
        which: AblateCmd,
    },
    /// Per-window feature-extraction and inference timing.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// 10-fold intra-subject cross-validation on one session.
    Intra {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-subject-out over several sessions.
    Loso {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required = true, num_args = 3..)]
        session: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AblateCmd {
    /// Accuracy vs training-data fraction.
    Duration {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',',
              default_values_t = [0.1, 0.25, 0.5, 0.75, 1.0])]
        fractions: Vec<f64>,
    },
    /// Accuracy vs injected EMG/kinematics misalignment.
    Offset {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',',
              default_values_t = [-500.0, -250.0, -100.0, 0.0, 100.0, 250.0, 500.0])]
        offsets_ms: Vec<f64>,
    },
    /// Accuracy vs number of frequency bands (leading subsets of the configured bands).
    Bands {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy vs sequence length.
    Seqlen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',',
              default_values_t = [1usize, 2, 5, 10])]
        seq_lens: Vec<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        let msg = e.to_string();
        eprintln!("error kind={} msg={:?}", error_kind(&e), msg);
        eprintln!("{msg}");
        std::process::exit(1);
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidBand(_) => "invalid-band",
        Error::InsufficientData(_) => "insufficient-data",
        Error::InvalidInput(_) => "invalid-input",
        Error::ShapeMismatch(_) => "shape-mismatch",
        Error::NotSpd(_) => "not-spd",
        Error::RankDeficient(_) => "rank-deficient",
        Error::UndefinedCorrelation(_) => "undefined-correlation",
        Error::Diverged(_) => "diverged",
        Error::UnsupportedLayout(_) => "unsupported-layout",
        Error::Malformed { .. } => "malformed-file",
        Error::Io(_) => "io",
        Error::Config(_) => "config",
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth { seed, out, duration_s, joints, channels, fs } => {
            let mut cfg = SynthConfig { seed, ..SynthConfig::default() };
            if let Some(d) = duration_s {
                cfg.duration_s = d;
            }
            if let Some(j) = joints {
                cfg.n_joints = j;
            }
            if let Some(c) = channels {
                cfg.n_channels = c;
            }
            if let Some(f) = fs {
                cfg.fs = f;
            }
            if joints.is_some() || channels.is_some() {
                cfg.coupling =
                    emgdecode::data::default_coupling(cfg.n_channels, cfg.n_joints);
            }
            let session = generate_synthetic(&cfg)?;
            save_session(&session, &out)?;
            println!(
                "wrote synthetic session {} ({:.0} s, {} channels, {} joints) to {}",
                session.subject_id,
                session.duration_s(),
                cfg.n_channels,
                cfg.n_joints,
                out.display()
            );
            Ok(())
        }
        Cmd::ImportEmgfk { archive, out } => {
            let sessions = import_emgfk(&archive)?;
            std::fs::create_dir_all(&out)?;
            for s in &sessions {
                save_session(s, &out.join(&s.subject_id))?;
            }
            println!("imported {} session(s) into {}", sessions.len(), out.display());
            Ok(())
        }
        Cmd::Sync { session, sweep, apply, config, max_lag_ms, out } => {
            cmd_sync(&session, sweep, apply, config.as_deref(), max_lag_ms, out)
        }
        Cmd::Features { session, out, config } => cmd_features(&session, &out, config.as_deref()),
        Cmd::Train { config, model, session, out } => {
            let rc = load_run_config(config.as_deref(), model.as_deref())?;
            let sessions = load_sessions(&session)?;
            let artifact = train_artifact(&sessions, &rc)?;
            artifact.save(&out)?;
            if let Some(log) = &artifact.log {
                println!(
                    "trained {} for {} epochs (best epoch {}, val loss {:.5})",
                    artifact.kind,
                    log.train_loss.len(),
                    log.best_epoch,
                    log.val_loss[log.best_epoch]
                );
            } else {
                println!("trained {}", artifact.kind);
            }
            println!("wrote model artifact to {}", out.display());
            Ok(())
        }
        Cmd::Predict { model, session, out } => {
            let artifact = ModelArtifact::load(&model)?;
            let sess = load_session(&session)?;
            let csv = predict_csv(&artifact, &sess)?;
            std::fs::write(&out, csv)?;
            println!("wrote predictions to {}", out.display());
            Ok(())
        }
        Cmd::Eval { protocol } => match protocol {
            EvalCmd::Intra { config, session, out } => {
                let rc = load_run_config(config.as_deref(), None)?;
                let sess = load_session(&session)?;
                let outcome = intra_subject_cv(&sess, &rc.eval_config()?)?;
                let report =
                    EvalReport::new("intra-subject", sess.kin.joint_names.clone(), outcome, rc.echo())?;
                write_report(&out, &report, Some(&sess))?;
                println!("{}", report.to_human());
                Ok(())
            }
            EvalCmd::Loso { config, session, out } => {
                let rc = load_run_config(config.as_deref(), None)?;
                let sessions = load_sessions(&session)?;
                let outcome = loso_cv(&sessions, &rc.eval_config()?)?;
                let report = EvalReport::new(
                    "leave-one-subject-out",
                    sessions[0].kin.joint_names.clone(),
                    outcome,
                    rc.echo(),
                )?;
                write_report(&out, &report, None)?;
                println!("{}", report.to_human());
                Ok(())
            }
        },
        Cmd::Ablate { which } => cmd_ablate(which),
        Cmd::Bench { model, session, iterations, out } => {
            let artifact = ModelArtifact::load(&model)?;
            let sess = load_session(&session)?;
            let cfg = match &artifact.meta.pipeline {
                FeaturePipeline::Cmts { cfg, .. } => cfg.clone(),
                FeaturePipeline::Tdf { .. } => {
                    return Err(Error::InvalidInput(
                        "timing benchmark covers the covariance feature path; \
                         this artifact uses time-domain features"
                            .into(),
                    ))
                }
            };
            let neural = match &artifact.model {
                TrainedModel::Neural(m) => Some(m),
                TrainedModel::Ridge(_) => None,
            };
            let report = timing_benchmark(&sess, &cfg, neural, iterations)?;
            let mut text = format!("# {}\n", tool_version());
            text.push_str(&timing_csv(&report));
            println!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, text)?;
                println!("wrote timing table to {}", path.display());
            }
            Ok(())
        }
    }
}

fn load_run_config(path: Option<&Path>, model: Option<&str>) -> Result<RunConfig> {
    match (path, model) {
        (Some(p), _) => RunConfig::from_path(p),
        (None, Some(m)) => Ok(RunConfig::default_for(m.parse()?)),
        (None, None) => Ok(RunConfig::default()),
    }
}

fn load_sessions(paths: &[PathBuf]) -> Result<Vec<Session>> {
    paths.iter().map(|p| load_session(p)).collect()
}

/// Trains one model on the given sessions: a single session splits off a
/// random contiguous 10% of its sequences for validation; several sessions
/// hold one seeded-randomly chosen subject out for validation.
fn train_artifact(sessions: &[Session], rc: &RunConfig) -> Result<ModelArtifact> {
    if sessions.is_empty() {
        return Err(Error::InvalidInput("no training sessions".into()));
    }
    let kind = rc.model_kind()?;
    let feature = rc.feature_kind()?;
    let eval_cfg = rc.eval_config()?;
    let preps: Vec<_> = sessions
        .iter()
        .map(|s| prepare_session(s, &feature))
        .collect::<Result<Vec<_>>>()?;

    let (fitted, train_set, val_set, emg_stats) = if preps.len() == 1 {
        let prep = &preps[0];
        let n = prep.n_sequences();
        let n_val = ((n as f64 * eval_cfg.val_fraction).ceil() as usize).max(1);
        if n_val + 1 >= n {
            return Err(Error::InsufficientData(format!(
                "{n} sequences cannot supply {n_val} validation and any training"
            )));
        }
        let mut rng = component_rng(rc.seed, "train/val-split");
        let start = rng.gen_range(0..=n - n_val);
        let val_idx: Vec<usize> = (start..start + n_val).collect();
        let train_idx: Vec<usize> =
            (0..start).chain(start + n_val..n).collect();
        let all_windows: Vec<usize> = (0..prep.windows.len()).collect();
        let (feats, fitted) = emgdecode::eval::fit_features_single(prep, &all_windows)?;
        let train_set = prep.build_sample_set(&feats, &train_idx)?;
        let val_set = prep.build_sample_set(&feats, &val_idx)?;
        (fitted, train_set, val_set, Some(prep.emg_stats.clone()))
    } else {
        let pool: Vec<_> = preps.iter().collect();
        let fitted = emgdecode::eval::fit_features_pooled(&pool)?;
        let mut rng = component_rng(rc.seed, "train/val-subject");
        let val_subject = rng.gen_range(0..preps.len());
        let mut train_sets = Vec::new();
        let mut val_set = None;
        for (i, prep) in preps.iter().enumerate() {
            let feats = emgdecode::eval::apply_features(prep, &fitted)?;
            let idx: Vec<usize> = (0..prep.n_sequences()).collect();
            let set = prep.build_sample_set(&feats, &idx)?;
            if i == val_subject {
                val_set = Some(set);
            } else {
                train_sets.push(set);
            }
        }
        let train_set = merge_sets(&train_sets)?;
        // multi-subject models standardize each new subject's EMG on its own
        (fitted, train_set, val_set.unwrap(), None)
    };

    let feat_dim = train_set.x.dim().2;
    let n_joints = train_set.y.ncols();
    let train_cfg = TrainConfig { seed: rc.seed, ..rc.train.clone() };
    let (model, log) = match kind {
        ModelKind::Ridge => {
            let m = ridge_fit(&train_set, &val_set, &rc.eval.lambda_grid)?;
            (TrainedModel::Ridge(m), None)
        }
        ModelKind::MlpCmts | ModelKind::MlpTdf => {
            let mut m = build_mlp(feat_dim, train_set.x.dim().1, n_joints, rc.seed);
            let log = train(&mut m, &train_set, &val_set, &train_cfg)?;
            (TrainedModel::Neural(m), Some(log))
        }
        ModelKind::Trr | ModelKind::TrrSimplified => {
            let sizes = rc.sizes.trr.clone().unwrap_or_default();
            let mut m = build_trr_sized(feat_dim, n_joints, rc.seed, &sizes);
            let log = train(&mut m, &train_set, &val_set, &train_cfg)?;
            (TrainedModel::Neural(m), Some(log))
        }
    };

    let pipeline = match (&feature, fitted) {
        (FeatureKind::Cmts(cfg), emgdecode::eval::FittedFeatures::Cmts { refs }) => {
            FeaturePipeline::Cmts { cfg: cfg.clone(), refs }
        }
        (
            FeatureKind::Tdf { win_ms, step_ms, seq_len, thresholds },
            emgdecode::eval::FittedFeatures::Tdf { mean, std },
        ) => FeaturePipeline::Tdf {
            win_ms: *win_ms,
            step_ms: *step_ms,
            seq_len: *seq_len,
            ssc_eps: thresholds.ssc_eps,
            wamp_theta: thresholds.wamp_theta,
            feat_mean: mean,
            feat_std: std,
        },
        _ => unreachable!("fitted features follow the configured kind"),
    };
    Ok(ModelArtifact {
        kind,
        model,
        meta: PipelineMeta {
            pipeline,
            emg_stats,
            n_channels: sessions[0].emg.n_channels(),
            fs: sessions[0].emg.fs,
        },
        seed: rc.seed,
        log,
        config_echo: Some(rc.echo()),
        tool_version: tool_version(),
    })
}

fn merge_sets(sets: &[SampleSet]) -> Result<SampleSet> {
    let samples: Vec<CmtsSample> = sets
        .iter()
        .flat_map(|set| {
            (0..set.len()).map(move |i| CmtsSample {
                features: set.x.slice(s![i, .., ..]).to_owned(),
                target: set.y.row(i).to_owned(),
                origin: set.origins[i].clone(),
            })
        })
        .collect();
    SampleSet::from_samples(&samples)
}

/// One prediction row per sliding window; the first `seq_len - 1` windows
/// reuse the earliest window's features to fill their missing context.
fn predict_csv(artifact: &ModelArtifact, session: &Session) -> Result<String> {
    session.validate()?;
    if session.emg.n_channels() != artifact.meta.n_channels {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} EMG channels, session has {}",
            artifact.meta.n_channels,
            session.emg.n_channels()
        )));
    }
    let (emg, _) = standardize_per_channel(&session.emg, artifact.meta.emg_stats.as_ref())?;
    let (feats, windows, seq_len) = match &artifact.meta.pipeline {
        FeaturePipeline::Cmts { cfg, refs } => {
            let wc = band_window_covariances(&emg, cfg)?;
            let feats = project_windows(&wc, refs)?;
            (feats, wc.windows, cfg.seq_len)
        }
        FeaturePipeline::Tdf { win_ms, step_ms, seq_len, ssc_eps, wamp_theta, feat_mean, feat_std } => {
            let windows = sliding_windows(*win_ms, *step_ms, emg.n_samples(), emg.fs);
            if windows.is_empty() {
                return Err(Error::InsufficientData("session shorter than one window".into()));
            }
            let th = emgdecode::neural::TdfThresholds { ssc_eps: *ssc_eps, wamp_theta: *wamp_theta };
            let d = feat_mean.len();
            let mut feats = Array2::zeros((windows.len(), d));
            for (w, &(a, b)) in windows.iter().enumerate() {
                let row = tdf_features(emg.data.slice(s![.., a..b]), th)?;
                for (k, v) in row.into_iter().enumerate() {
                    feats[(w, k)] = (v - feat_mean[k]) / feat_std[k];
                }
            }
            (feats, windows, *seq_len)
        }
    };

    let n_windows = windows.len();
    let d = feats.ncols();
    let n_joints = match &artifact.model {
        TrainedModel::Neural(m) => m.n_joints,
        TrainedModel::Ridge(r) => r.w.ncols(),
    };
    let mut samples = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let mut seq = Array2::zeros((seq_len, d));
        for (k, offset) in (0..seq_len).rev().enumerate() {
            let src = w.saturating_sub(offset);
            seq.row_mut(k).assign(&feats.row(src));
        }
        samples.push(CmtsSample {
            features: seq,
            target: Array1::zeros(n_joints),
            origin: (session.subject_id.clone(), windows[w].1),
        });
    }
    let set = SampleSet::from_samples(&samples)?;
    let pred = match &artifact.model {
        TrainedModel::Neural(m) => emgdecode::neural::predict(m, &set)?,
        TrainedModel::Ridge(r) => r.predict(&set),
    };

    let names: Vec<String> = if session.kin.joint_names.len() == n_joints {
        session.kin.joint_names.clone()
    } else {
        (0..n_joints).map(|j| format!("joint{j}")).collect()
    };
    let mut csv = format!("# {}\ntime_s,{}\n", tool_version(), names.join(","));
    for w in 0..n_windows {
        let t = windows[w].1 as f64 / session.emg.fs;
        let _ = write!(csv, "{t:.4}");
        for j in 0..n_joints {
            let _ = write!(csv, ",{:.4}", pred[(w, j)]);
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn cmd_sync(
    session_path: &Path,
    sweep: bool,
    apply: bool,
    config: Option<&Path>,
    max_lag_ms: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut session = load_session(session_path)?;
    let max_lag = max_lag_ms.unwrap_or(DEFAULT_MAX_LAG_MS);
    let full = find_offset(&session.emg, &session.kin, max_lag)?;
    println!(
        "offset: {:+.1} ms (peak correlation {:.3})",
        full.offset_ms, full.peak_correlation
    );

    // real recordings can drift, so check the halves independently
    let halves = if matches!(session.provenance, Provenance::Real) {
        Some((
            find_offset_on_range(&session, 0.0, 0.5, max_lag)?,
            find_offset_on_range(&session, 0.5, 1.0, max_lag)?,
        ))
    } else {
        None
    };
    if let Some((a, b)) = &halves {
        println!("  first half:  {:+.1} ms (r={:.3})", a.offset_ms, a.peak_correlation);
        println!("  second half: {:+.1} ms (r={:.3})", b.offset_ms, b.peak_correlation);
    }

    let mut text = format!(
        "# {}\noffset_ms = {:.3}\npeak_correlation = {:.6}\n",
        tool_version(),
        full.offset_ms,
        full.peak_correlation
    );
    if let Some((a, b)) = &halves {
        let _ = writeln!(text, "first_half_offset_ms = {:.3}", a.offset_ms);
        let _ = writeln!(text, "second_half_offset_ms = {:.3}", b.offset_ms);
    }
    text.push_str("\n# lag_ms,correlation\n");
    for (lag, r) in &full.correlation_curve {
        let _ = writeln!(text, "{lag:.3},{r:.6}");
    }
    let out_path = out.unwrap_or_else(|| session_path.join("sync.txt"));
    std::fs::write(&out_path, text)?;
    println!("wrote sync result to {}", out_path.display());

    if apply {
        session.apply_offset(full.offset_ms)?;
        save_session(&session, session_path)?;
        println!("applied offset and rewrote {}", session_path.display());
    }

    if sweep {
        let rc = match config {
            Some(p) => RunConfig::from_path(p)?,
            // ridge keeps the default sweep cheap
            None => RunConfig::default_for(ModelKind::Ridge),
        };
        let offsets = [-500.0, -250.0, -100.0, 0.0, 100.0, 250.0, 500.0];
        let points = offset_sweep_eval(&session, &offsets, &rc.eval_config()?)?;
        let mut csv = format!("# {}\noffset_ms,nmse_mean,abs_error_mean_deg\n", tool_version());
        for p in &points {
            let _ = writeln!(
                csv,
                "{:.1},{:.6},{:.6}",
                p.offset_ms, p.outcome.pooled_nmse.mean, p.outcome.pooled_abs.mean
            );
        }
        let sweep_path = out_path.with_extension("sweep.csv");
        std::fs::write(&sweep_path, csv)?;
        println!("wrote offset sweep to {}", sweep_path.display());
    }
    Ok(())
}

fn find_offset_on_range(session: &Session, from: f64, to: f64, max_lag: f64) -> Result<SyncResult> {
    let n = session.emg.n_samples();
    let a = (n as f64 * from) as usize;
    let b = (n as f64 * to) as usize;
    let emg = EmgRecording {
        data: session.emg.data.slice(s![.., a..b]).to_owned(),
        fs: session.emg.fs,
        channel_names: session.emg.channel_names.clone(),
    };
    let kin = emgdecode::signal::KinematicsTrack {
        angles: session.kin.angles.slice(s![.., a..b]).to_owned(),
        fs: session.kin.fs,
        joint_names: session.kin.joint_names.clone(),
    };
    find_offset(&emg, &kin, max_lag)
}

fn cmd_features(session_path: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let rc = load_run_config(config, None)?;
    let session = load_session(session_path)?;
    let prep = prepare_session(&session, &rc.feature_kind()?)?;
    let all: Vec<usize> = (0..prep.windows.len()).collect();
    let (feats, _) = emgdecode::eval::fit_features_single(&prep, &all)?;
    let mut csv = format!("# {}\nwindow_start,window_end", tool_version());
    for k in 0..feats.ncols() {
        let _ = write!(csv, ",f{k}");
    }
    csv.push('\n');
    for (w, &(a, b)) in prep.windows.iter().enumerate() {
        let _ = write!(csv, "{a},{b}");
        for v in feats.row(w) {
            let _ = write!(csv, ",{v:.8e}");
        }
        csv.push('\n');
    }
    std::fs::write(out, csv)?;
    println!(
        "wrote {} windows x {} features to {}",
        prep.windows.len(),
        feats.ncols(),
        out.display()
    );
    Ok(())
}

fn write_report(out_dir: &Path, report: &EvalReport, session: Option<&Session>) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let stamp = format!("# {}\n", tool_version());
    std::fs::write(out_dir.join("report.txt"), report.to_human())?;
    std::fs::write(out_dir.join("folds.csv"), format!("{stamp}{}", report.to_csv()))?;
    std::fs::write(out_dir.join("per_joint.csv"), format!("{stamp}{}", report.per_joint_csv()))?;
    if let Some(sess) = session {
        // joint-angle diversity of the evaluated session
        let angles = sess.kin.angles.t().to_owned();
        if let Ok(p) = pca_explained_variance(&angles, 0.9) {
            std::fs::write(out_dir.join("pca.csv"), format!("{stamp}{}", pca_csv(&p)))?;
        }
    }
    println!("wrote report files to {}", out_dir.display());
    Ok(())
}

fn cmd_ablate(which: AblateCmd) -> Result<()> {
    match which {
        AblateCmd::Duration { config, session, out, fractions } => {
            let rc = load_run_config(config.as_deref(), None)?;
            let sess = load_session(&session)?;
            let points = training_duration_sweep(&sess, &fractions, &rc.eval_config()?)?;
            let csv = format!("# {}\n{}", tool_version(), sweep_csv(&points));
            std::fs::write(&out, csv)?;
            println!("wrote duration sweep ({} rows) to {}", points.len(), out.display());
            Ok(())
        }
        AblateCmd::Offset { config, session, out, offsets_ms } => {
            let rc = load_run_config(config.as_deref(), None)?;
            let sess = load_session(&session)?;
            let points = offset_sweep_eval(&sess, &offsets_ms, &rc.eval_config()?)?;
            let mut csv = format!("# {}\noffset_ms,nmse_mean,abs_error_mean_deg\n", tool_version());
            for p in &points {
                let _ = writeln!(
                    csv,
                    "{:.1},{:.6},{:.6}",
                    p.offset_ms, p.outcome.pooled_nmse.mean, p.outcome.pooled_abs.mean
                );
            }
            std::fs::write(&out, csv)?;
            println!("wrote offset sweep ({} rows) to {}", points.len(), out.display());
            Ok(())
        }
        AblateCmd::Bands { config, session, out } => {
            let rc = load_run_config(config.as_deref(), None)?;
            let sess = load_session(&session)?;
            let mut csv = format!("# {}\nn_bands,bands_hz,nmse_mean,abs_error_mean_deg\n", tool_version());
            for k in 1..=rc.features.bands.len() {
                let mut sub = rc.clone();
                sub.features.bands.truncate(k);
                let outcome = intra_subject_cv(&sess, &sub.eval_config()?)?;
                let bands: Vec<String> = sub
                    .features
                    .bands
                    .iter()
                    .map(|[l, h]| format!("{l}-{h}"))
                    .collect();
                let _ = writeln!(
                    csv,
                    "{k},{},{:.6},{:.6}",
                    bands.join(" "),
                    outcome.pooled_nmse.mean,
                    outcome.pooled_abs.mean
                );
            }
            std::fs::write(&out, csv)?;
            println!("wrote band sweep to {}", out.display());
            Ok(())
        }
        AblateCmd::Seqlen { config, session, out, seq_lens } => {
            let rc = load_run_config(config.as_deref(), None)?;
            let sess = load_session(&session)?;
            let mut csv = format!("# {}\nseq_len,nmse_mean,abs_error_mean_deg\n", tool_version());
            for &sl in &seq_lens {
                let mut sub = rc.clone();
                sub.features.seq_len = sl;
                if let Some(trr) = &mut sub.sizes.trr {
                    trr.seq_len = sl;
                }
                let outcome = intra_subject_cv(&sess, &sub.eval_config()?)?;
                let _ = writeln!(
                    csv,
                    "{sl},{:.6},{:.6}",
                    outcome.pooled_nmse.mean, outcome.pooled_abs.mean
                );
            }
            std::fs::write(&out, csv)?;
            println!("wrote sequence-length sweep to {}", out.display());
            Ok(())
        }
    }
}
