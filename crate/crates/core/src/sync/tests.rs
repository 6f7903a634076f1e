use super::*;
use crate::rng::component_rng;
use ndarray::Array2;
use rand::Rng;

#[test]
fn pearson_matches_product_moment_oracle() {
    let mut rng = component_rng(3, "test/pearson");
    let a: Vec<f64> = (0..500).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let b: Vec<f64> = (0..500).map(|_| rng.gen_range(-2.0..2.0)).collect();
    // independent formulation from raw sums
    let n = a.len() as f64;
    let (sx, sy): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sxx: f64 = a.iter().map(|v| v * v).sum();
    let syy: f64 = b.iter().map(|v| v * v).sum();
    let sxy: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let oracle = (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    let got = pearson(&a, &b).unwrap();
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
}

#[test]
fn pearson_extremes_and_degenerate() {
    let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    let flat = vec![4.2; 100];
    assert!(matches!(
        pearson(&x, &flat),
        Err(crate::Error::UndefinedCorrelation(_))
    ));
}

/// Aperiodic bumpy trace used as a shared "activity" signal.
fn bumpy(n: usize, fs: f64) -> Vec<f64> {
    let centers = [8.0, 19.5, 33.0, 47.25, 61.0, 74.5];
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            centers
                .iter()
                .map(|&c| (-(t - c) * (t - c) / 0.5).exp())
                .sum::<f64>()
        })
        .collect()
}

#[test]
fn trace_search_recovers_injected_sample_shifts() {
    let fs = 200.0;
    let n = (85.0 * fs) as usize;
    let trace = bumpy(n, fs);
    for shift in [-32i64, -7, 0, 7, 32] {
        // positive shift delays the "kinematics" trace
        let speed: Vec<f64> = (0..n)
            .map(|i| {
                let j = i as i64 - shift;
                trace[j.clamp(0, n as i64 - 1) as usize]
            })
            .collect();
        let res = find_offset_traces(&trace, &speed, fs, 1000.0).unwrap();
        let expect_ms = shift as f64 / fs * 1000.0;
        assert!(
            (res.offset_ms - expect_ms).abs() < 1e-9,
            "shift {shift}: got {} ms, expected {} ms",
            res.offset_ms,
            expect_ms
        );
        assert!(res.peak_correlation > 0.99);
    }
}

#[test]
fn trace_search_is_antisymmetric_under_argument_swap() {
    let fs = 200.0;
    let n = (85.0 * fs) as usize;
    let trace = bumpy(n, fs);
    let shifted: Vec<f64> = (0..n)
        .map(|i| trace[(i as i64 - 20).clamp(0, n as i64 - 1) as usize])
        .collect();
    let fwd = find_offset_traces(&trace, &shifted, fs, 500.0).unwrap();
    let rev = find_offset_traces(&shifted, &trace, fs, 500.0).unwrap();
    assert!((fwd.offset_ms + rev.offset_ms).abs() < 1e-9);
}

#[test]
fn curve_covers_range_and_contains_the_peak() {
    let fs = 100.0;
    let n = (15.0 * fs) as usize;
    let trace = bumpy(n, fs);
    let res = find_offset_traces(&trace, &trace, fs, 200.0).unwrap();
    assert_eq!(res.correlation_curve.len(), 41);
    assert_eq!(res.correlation_curve.first().unwrap().0, -200.0);
    assert_eq!(res.correlation_curve.last().unwrap().0, 200.0);
    let max = res
        .correlation_curve
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(max, res.peak_correlation);
    assert!(res
        .correlation_curve
        .iter()
        .any(|&(l, r)| l == res.offset_ms && r == res.peak_correlation));
}

#[test]
fn offset_search_needs_ten_seconds_of_overlap() {
    let fs = 100.0;
    let n = (6.0 * fs) as usize;
    let trace = bumpy(n, fs);
    let err = find_offset_traces(&trace, &trace, fs, 500.0).unwrap_err();
    assert!(matches!(err, crate::Error::InsufficientData(_)));
}

/// Two-channel EMG whose amplitude follows `m`; the second channel carries
/// an attenuated copy.
fn am_emg(m: &[f64], fs: f64) -> EmgRecording {
    let n = m.len();
    let mut data = Array2::zeros((2, n));
    for i in 0..n {
        let carrier = (2.0 * std::f64::consts::PI * 45.0 * i as f64 / fs).sin();
        data[(0, i)] = m[i] * carrier;
        data[(1, i)] = 0.5 * m[i] * carrier;
    }
    EmgRecording::from_data(data, fs).unwrap()
}

#[test]
fn move_command_peaks_during_bursts_and_rests_between() {
    let fs = 200.0;
    let n = (85.0 * fs) as usize;
    let act = bumpy(n, fs);
    let m: Vec<f64> = act.iter().map(|&a| 0.05 + a).collect();
    let mv = move_command(&am_emg(&m, fs)).unwrap();
    assert_eq!(mv.dim(), (2, n));
    assert!(mv.iter().all(|&v| v >= 0.0));
    let cmd = mv.row(0);
    // peak near the first burst center (8 s)
    let peak = cmd
        .iter()
        .take((14.0 * fs) as usize)
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let peak_t = peak as f64 / fs;
    assert!((peak_t - 8.0).abs() < 0.5, "peak at {peak_t} s");
    // quiet stretch (14 s) well below the burst amplitude
    let burst = cmd[(8.0 * fs) as usize];
    let quiet = cmd[(14.0 * fs) as usize];
    assert!(quiet < 0.2 * burst, "quiet {quiet} vs burst {burst}");
}

#[test]
fn move_command_of_sustained_tone_is_near_zero() {
    let fs = 200.0;
    let n = (20.0 * fs) as usize;
    let m = vec![1.0; n];
    let mv = move_command(&am_emg(&m, fs)).unwrap();
    let peak_env = 1.0;
    assert!(mv.iter().all(|&v| v < 0.05 * peak_env), "max {}", mv.iter().fold(0.0f64, |a, &b| a.max(b)));
}

#[test]
fn move_command_is_sign_flip_invariant_and_zero_on_silence() {
    let fs = 200.0;
    let n = (30.0 * fs) as usize;
    let act = bumpy(n, fs);
    let m: Vec<f64> = act.iter().map(|&a| 0.05 + a).collect();
    let rec = am_emg(&m, fs);
    let neg = EmgRecording::from_data(rec.data.mapv(|v| -v), fs).unwrap();
    let a = move_command(&rec).unwrap();
    let b = move_command(&neg).unwrap();
    let max_diff = (&a - &b).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    assert!(max_diff < 1e-9);

    let silent = EmgRecording::from_data(Array2::zeros((2, n)), fs).unwrap();
    let mv = move_command(&silent).unwrap();
    assert!(mv.iter().all(|&v| v == 0.0));

    let short = EmgRecording::from_data(Array2::zeros((2, 100)), fs).unwrap();
    assert!(matches!(
        move_command(&short),
        Err(crate::Error::InsufficientData(_))
    ));
}

#[test]
fn joint_speed_of_a_ramp_is_its_slope() {
    let fs = 100.0;
    let n = (20.0 * fs) as usize;
    let angles = Array2::from_shape_fn((1, n), |(_, i)| 90.0 + 3.0 * i as f64 / fs);
    let kin = KinematicsTrack::new(angles, fs, vec!["j".into()]).unwrap();
    let speed = joint_speed(&kin).unwrap();
    for (i, &v) in speed.iter().enumerate().skip(200).take(n - 400) {
        assert!((v - 3.0).abs() < 0.15, "sample {i}: {v}");
    }
}

#[test]
fn joint_speed_takes_max_over_joints() {
    let fs = 100.0;
    let n = (20.0 * fs) as usize;
    let mut angles = Array2::zeros((2, n));
    for i in 0..n {
        angles[(0, i)] = 90.0 + 2.0 * i as f64 / fs; // 2 deg/s
        angles[(1, i)] = 90.0 + 5.0 * i as f64 / fs; // 5 deg/s
    }
    let kin = KinematicsTrack::new(angles, fs, vec!["a".into(), "b".into()]).unwrap();
    let speed = joint_speed(&kin).unwrap();
    assert!((speed[n / 2] - 5.0).abs() < 0.25);
}

/// End-to-end: angles move in bursts, EMG amplitude follows joint speed,
/// and a known delay is injected into the kinematics.
#[test]
fn find_offset_recovers_injected_delays_within_twenty_ms() {
    let fs = 200.0;
    let n = (85.0 * fs) as usize;
    let act = bumpy(n, fs);
    // integrate activity into an angle trajectory, alternating direction
    let mut theta = vec![90.0f64; n];
    let mut dir = 1.0;
    for i in 1..n {
        if act[i] < 0.01 && act[i - 1] >= 0.01 {
            dir = -dir;
        }
        theta[i] = (theta[i - 1] + dir * act[i] * 30.0 / fs).clamp(10.0, 170.0);
    }
    let m: Vec<f64> = act.iter().map(|&a| 0.05 + a).collect();
    let rec = am_emg(&m, fs);

    for delay_ms in [-160.0f64, 0.0, 160.0] {
        let shift = (delay_ms / 1000.0 * fs).round() as i64;
        let delayed = Array2::from_shape_fn((1, n), |(_, i)| {
            let j = i as i64 - shift;
            theta[j.clamp(0, n as i64 - 1) as usize]
        });
        let kin = KinematicsTrack::new(delayed, fs, vec!["j".into()]).unwrap();
        let res = find_offset(&rec, &kin, 1000.0).unwrap();
        assert!(
            (res.offset_ms - delay_ms).abs() <= 20.0,
            "injected {delay_ms} ms, recovered {} ms (r = {})",
            res.offset_ms,
            res.peak_correlation
        );
    }
}

#[test]
fn find_offset_rejects_motionless_kinematics() {
    let fs = 200.0;
    let n = (85.0 * fs) as usize;
    let act = bumpy(n, fs);
    let m: Vec<f64> = act.iter().map(|&a| 0.05 + a).collect();
    let rec = am_emg(&m, fs);
    let kin =
        KinematicsTrack::new(Array2::from_elem((1, n), 90.0), fs, vec!["j".into()]).unwrap();
    assert!(matches!(
        find_offset(&rec, &kin, 1000.0),
        Err(crate::Error::UndefinedCorrelation(_))
    ));
}
