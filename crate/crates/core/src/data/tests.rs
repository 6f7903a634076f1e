use super::*;
use crate::rng::component_rng;
use crate::signal::default_joint_names;
use ndarray::{Array2, Array3};
use rand::Rng;

// --- landmark geometry ---

/// Hand with straight fingers pointing in distinct directions; every
/// triplet is collinear.
fn straight_hand() -> Array3<f64> {
    let mut f = Array3::zeros((1, 21, 3));
    for finger in 0..5 {
        let dir = [1.0 + finger as f64 * 0.3, finger as f64, 0.5 * finger as f64];
        for seg in 0..4 {
            let p = 1 + 4 * finger + seg;
            let d = (seg + 1) as f64;
            f[(0, p, 0)] = dir[0] * d;
            f[(0, p, 1)] = dir[1] * d;
            f[(0, p, 2)] = dir[2] * d;
        }
    }
    f
}

#[test]
fn extended_fingers_give_straight_angles() {
    let out = angles_from_landmarks(straight_hand().view(), 30.0).unwrap();
    assert_eq!(out.track.joint_names, default_joint_names());
    assert_eq!(out.infilled, 0);
    for &a in out.track.angles.iter() {
        // acos is ill-conditioned near 180 degrees, so allow a few ulps' worth
        assert!((a - 180.0).abs() < 1e-5, "{a}");
    }
}

#[test]
fn right_angle_triplet_gives_ninety_degrees() {
    let mut f = straight_hand();
    // bend the index PIP: triplet (index MCP, PIP, DIP) with orthogonal arms
    // index finger landmarks are 5..=8; make MCP-PIP and DIP-PIP orthogonal
    let set = |f: &mut Array3<f64>, p: usize, v: [f64; 3]| {
        for (d, &x) in v.iter().enumerate() {
            f[(0, p, d)] = x;
        }
    };
    set(&mut f, 5, [1.0, 0.0, 0.0]); // MCP
    set(&mut f, 6, [0.0, 0.0, 0.0]); // PIP
    set(&mut f, 7, [0.0, 1.0, 0.0]); // DIP
    set(&mut f, 8, [0.0, 2.0, 0.0]); // tip keeps DIP straight
    let out = angles_from_landmarks(f.view(), 30.0).unwrap();
    // index PIP is joint 4 (finger 1, second triplet)
    assert!((out.track.angles[(4, 0)] - 90.0).abs() < 1e-9);
}

fn rotation_matrix(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let norm = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
    let (x, y, z) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
    let (c, s) = (angle.cos(), angle.sin());
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

#[test]
fn angles_invariant_under_rigid_motion_and_scaling() {
    let mut rng = component_rng(51, "test/rigid");
    let frames = Array3::from_shape_fn((5, 21, 3), |_| rng.gen_range(-1.0..1.0));
    let base = angles_from_landmarks(frames.view(), 30.0).unwrap();

    let r = rotation_matrix(
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)],
        rng.gen_range(0.1..3.0),
    );
    let tr = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
    let scale = 2.7;
    let moved = Array3::from_shape_fn((5, 21, 3), |(t, p, d)| {
        let v = [frames[(t, p, 0)], frames[(t, p, 1)], frames[(t, p, 2)]];
        scale * (r[d][0] * v[0] + r[d][1] * v[1] + r[d][2] * v[2]) + tr[d]
    });
    let got = angles_from_landmarks(moved.view(), 30.0).unwrap();
    let max_diff = (&got.track.angles - &base.track.angles)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_diff < 1e-9, "max diff {max_diff}");
}

#[test]
fn degenerate_frames_are_infilled_linearly() {
    let mut frames = Array3::zeros((3, 21, 3));
    for t in 0..3 {
        frames
            .index_axis_mut(ndarray::Axis(0), t)
            .assign(&straight_hand().index_axis_move(ndarray::Axis(0), 0));
    }
    // bend the thumb MCP by 60 degrees in frame 2 (landmarks 1..=4)
    let dir = 60.0f64.to_radians();
    for seg in 1..4 {
        let d = seg as f64;
        frames[(2, 1 + seg, 0)] = 1.0 + d * dir.cos();
        frames[(2, 1 + seg, 1)] = d * dir.sin();
        frames[(2, 1 + seg, 2)] = 0.0;
    }
    // frame 1: collapse the thumb PIP onto its MCP (degenerate triplets)
    for d in 0..3 {
        frames[(1, 2, d)] = frames[(1, 1, d)];
    }
    let out = angles_from_landmarks(frames.view(), 30.0).unwrap();
    assert!(out.infilled > 0);
    // thumb MCP (joint 0): 180 in frame 0, 120 in frame 2, so 150 infilled
    let a = out.track.angles;
    assert!((a[(0, 0)] - 180.0).abs() < 1e-5);
    assert!((a[(0, 2)] - 120.0).abs() < 1e-6);
    assert!((a[(0, 1)] - 150.0).abs() < 1e-6, "infilled {}", a[(0, 1)]);
}

#[test]
fn landmark_shape_is_validated() {
    let bad = Array3::zeros((2, 20, 3));
    assert!(angles_from_landmarks(bad.view(), 30.0).is_err());
    let nan = Array3::from_elem((2, 21, 3), f64::NAN);
    assert!(angles_from_landmarks(nan.view(), 30.0).is_err());
}

// --- synthetic generator ---

fn quick_cfg(seed: u64) -> SynthConfig {
    SynthConfig {
        n_joints: 4,
        n_channels: 3,
        duration_s: 20.0,
        fs: 200.0,
        coupling: default_coupling(3, 4),
        n_attractors: 5,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let a = generate_synthetic(&quick_cfg(7)).unwrap();
    let b = generate_synthetic(&quick_cfg(7)).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic(&quick_cfg(8)).unwrap();
    assert_ne!(a.emg.data, c.emg.data);
}

#[test]
fn synthetic_sessions_satisfy_invariants() {
    let s = generate_synthetic(&quick_cfg(3)).unwrap();
    s.validate().unwrap();
    assert_eq!(s.emg.n_samples(), (20.0 * 200.0) as usize);
    assert_eq!(s.kin.n_joints(), 4);
    assert!(s.kin.angles.iter().all(|&a| (10.0..=170.0).contains(&a)));
    assert!(s.emg.data.iter().all(|v| v.is_finite()));
    assert!(matches!(s.provenance, Provenance::Synthetic { .. }));
}

#[test]
fn motionless_config_yields_undefined_correlation() {
    // single attractor, zero coupling, zero noise: nothing moves
    let cfg = SynthConfig {
        coupling: vec![0.0; 12],
        noise: 0.0,
        n_attractors: 1,
        tonic_gain: 0.0,
        ..quick_cfg(9)
    };
    let s = generate_synthetic(&cfg).unwrap();
    assert!(matches!(
        crate::sync::find_offset(&s.emg, &s.kin, 1000.0),
        Err(crate::Error::UndefinedCorrelation(_))
    ));
}

#[test]
fn config_validation_rejects_bad_coupling() {
    let mut cfg = quick_cfg(0);
    cfg.coupling.pop();
    assert!(generate_synthetic(&cfg).is_err());
    let mut cfg = quick_cfg(0);
    cfg.coupling[0] = -0.5;
    assert!(generate_synthetic(&cfg).is_err());
    let mut cfg = quick_cfg(0);
    cfg.n_attractors = 0;
    assert!(generate_synthetic(&cfg).is_err());
}

// --- persistence ---

#[test]
fn session_round_trip_is_bit_identical_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1");
    let session = generate_synthetic(&quick_cfg(11)).unwrap();
    save_session(&session, &path).unwrap();
    let loaded = load_session(&path).unwrap();
    assert_eq!(loaded, session);

    let path2 = dir.path().join("s2");
    save_session(&loaded, &path2).unwrap();
    assert_eq!(
        std::fs::read(path.join("emg.bin")).unwrap(),
        std::fs::read(path2.join("emg.bin")).unwrap()
    );
    assert_eq!(
        std::fs::read(path.join("kin.bin")).unwrap(),
        std::fs::read(path2.join("kin.bin")).unwrap()
    );
}

#[test]
fn truncated_binary_names_byte_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s");
    save_session(&generate_synthetic(&quick_cfg(1)).unwrap(), &path).unwrap();
    let bin = path.join("emg.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 5]).unwrap();
    let err = load_session(&path).unwrap_err().to_string();
    assert!(err.contains("bytes"), "{err}");
    assert!(err.contains("expected"), "{err}");
}

#[test]
fn fs_mismatch_is_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s");
    save_session(&generate_synthetic(&quick_cfg(2)).unwrap(), &path).unwrap();
    let meta_path = path.join("meta.json");
    let meta = std::fs::read_to_string(&meta_path).unwrap();
    std::fs::write(&meta_path, meta.replace("\"kin_fs\": 200.0", "\"kin_fs\": 100.0")).unwrap();
    let err = load_session(&path).unwrap_err().to_string();
    assert!(err.to_lowercase().contains("resample"), "{err}");
}

#[test]
fn offset_application_is_single_shot() {
    let mut s = generate_synthetic(&quick_cfg(4)).unwrap();
    let before = s.kin.angles[(0, 400)];
    s.apply_offset(100.0).unwrap(); // 20 samples at 200 Hz
    assert_eq!(s.kin.angles[(0, 380)], before);
    assert_eq!(s.sync_offset_ms, Some(100.0));
    assert!(s.apply_offset(50.0).is_err());
}

#[test]
fn shift_kinematics_holds_edges() {
    let kin = KinematicsTrack::new(
        Array2::from_shape_fn((1, 100), |(_, i)| 10.0 + i as f64),
        100.0,
        vec!["j".into()],
    )
    .unwrap();
    let delayed = shift_kinematics(&kin, 50.0); // 5 samples
    assert_eq!(delayed.angles[(0, 0)], 10.0);
    assert_eq!(delayed.angles[(0, 10)], 15.0);
    let advanced = shift_kinematics(&kin, -50.0);
    assert_eq!(advanced.angles[(0, 0)], 15.0);
    assert_eq!(advanced.angles[(0, 99)], 109.0);
}

// --- import ---

#[test]
fn import_walks_canonical_directories_or_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("archive");
    std::fs::create_dir_all(&root).unwrap();
    for seed in [1u64, 2] {
        let s = generate_synthetic(&quick_cfg(seed)).unwrap();
        save_session(&s, &root.join(format!("subject{seed}"))).unwrap();
    }
    let sessions = import_emgfk(&root).unwrap();
    assert_eq!(sessions.len(), 2);
    for s in &sessions {
        s.validate().unwrap();
    }

    let junk = dir.path().join("junk");
    std::fs::create_dir_all(&junk).unwrap();
    std::fs::write(junk.join("readme.txt"), "not a dataset").unwrap();
    let err = import_emgfk(&junk).unwrap_err();
    assert!(matches!(err, Error::UnsupportedLayout(_)));
    assert!(err.to_string().contains("ArchiveAdapter"));

    assert!(import_emgfk(&dir.path().join("missing")).is_err());
}
