use super::*;
use ndarray::{array, Array2};
use num_complex::Complex64;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
        .collect()
}

fn rec_from_rows(rows: Vec<Vec<f64>>, fs: f64) -> EmgRecording {
    let n = rows[0].len();
    let c = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    EmgRecording::from_data(Array2::from_shape_vec((c, n), flat).unwrap(), fs).unwrap()
}

/// Brute-force periodogram: |DFT|^2 / (fs * n) at bin closest to `freq`.
/// Independent oracle for spectral content (no shared code with the filters).
fn periodogram_power(x: &[f64], freq: f64, fs: f64) -> f64 {
    let n = x.len();
    let k = (freq * n as f64 / fs).round() as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, &v) in x.iter().enumerate() {
        let phi = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
        acc += Complex64::from_polar(v, phi);
    }
    acc.norm_sqr() / (fs * n as f64)
}

fn deterministic_noise(n: usize, seed: u64) -> Vec<f64> {
    // xorshift-based uniform noise in [-1, 1], good enough for PSD checks
    let mut s = seed.max(1);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

#[test]
fn bandpass_rejects_stopband_sinusoid() {
    let x = sine(200.0, 500.0, 4000);
    let rec = rec_from_rows(vec![x.clone()], 500.0);
    let out = bandpass(&rec, BandSpec::new(15.0, 150.0), false).unwrap();
    let r = rms(out.data.row(0).as_slice().unwrap()) / rms(&x);
    assert!(r < 0.05, "stop-band RMS ratio {r}");
}

#[test]
fn bandpass_passband_identity_and_zero_lag() {
    let fs = 500.0;
    let x = sine(50.0, fs, 4000);
    let rec = rec_from_rows(vec![x.clone()], fs);
    let out = bandpass(&rec, BandSpec::new(15.0, 150.0), false).unwrap();
    let y = out.data.row(0).to_vec();
    let r = rms(&y) / rms(&x);
    assert!((r - 1.0).abs() < 0.05, "pass-band RMS ratio {r}");

    // cross-correlation peak at zero lag
    let max_lag = 20i64;
    let mut best = (0i64, f64::MIN);
    for lag in -max_lag..=max_lag {
        let mut c = 0.0;
        for t in 0..x.len() {
            let u = t as i64 + lag;
            if u >= 0 && (u as usize) < y.len() {
                c += x[t] * y[u as usize];
            }
        }
        if c > best.1 {
            best = (lag, c);
        }
    }
    assert_eq!(best.0, 0, "zero-phase filter should have zero-lag peak");
}

#[test]
fn bandpass_psd_suppression_outside_band() {
    let fs = 500.0;
    let x = deterministic_noise(8192, 7);
    let rec = rec_from_rows(vec![x.clone()], fs);
    let out = bandpass(&rec, BandSpec::new(40.0, 80.0), false).unwrap();
    let y = out.data.row(0).to_vec();
    for f in [20.0, 120.0] {
        let ratio = periodogram_power(&y, f, fs) / periodogram_power(&x, f, fs);
        assert!(ratio < 0.1, "PSD out/in ratio at {f} Hz = {ratio}");
    }
}

#[test]
fn bandpass_causal_attenuates_one_octave_out() {
    // one octave below the 15 Hz edge, single causal pass: >= 20 dB down
    let fs = 500.0;
    let x = sine(7.5, fs, 8000);
    let rec = rec_from_rows(vec![x.clone()], fs);
    let out = bandpass(&rec, BandSpec::new(15.0, 150.0), true).unwrap();
    let r = rms(&out.data.row(0).to_vec()[2000..]) / rms(&x);
    assert!(r < 0.1, "causal attenuation only {} dB", -20.0 * r.log10());
}

#[test]
fn bandpass_invalid_edge_errors() {
    let rec = rec_from_rows(vec![sine(10.0, 500.0, 100)], 500.0);
    assert!(bandpass(&rec, BandSpec::new(15.0, 250.0), false).is_err());
    assert!(bandpass(&rec, BandSpec::new(0.0, 100.0), false).is_err());
}

#[test]
fn filters_are_linear() {
    let fs = 500.0;
    let x = deterministic_noise(2000, 3);
    let y = deterministic_noise(2000, 5);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
    let band = BandSpec::new(15.0, 150.0);
    let fx = bandpass(&rec_from_rows(vec![x], fs), band, false).unwrap();
    let fy = bandpass(&rec_from_rows(vec![y], fs), band, false).unwrap();
    let fc = bandpass(&rec_from_rows(vec![combo], fs), band, false).unwrap();
    let scale = rms(fc.data.row(0).as_slice().unwrap()).max(1.0);
    for t in 0..2000 {
        let lhs = fc.data[[0, t]];
        let rhs = 2.0 * fx.data[[0, t]] - 0.5 * fy.data[[0, t]];
        assert!((lhs - rhs).abs() / scale < 1e-9);
    }
}

#[test]
fn notch_kills_notched_keeps_neighbors() {
    let fs = 500.0;
    let x50 = sine(50.0, fs, 4000);
    let x30 = sine(30.0, fs, 4000);
    let r50 = notch(&rec_from_rows(vec![x50.clone()], fs), &[50.0, 100.0]).unwrap();
    let r30 = notch(&rec_from_rows(vec![x30.clone()], fs), &[50.0, 100.0]).unwrap();
    assert!(rms(r50.data.row(0).as_slice().unwrap()) / rms(&x50) < 0.1);
    let keep = rms(r30.data.row(0).as_slice().unwrap()) / rms(&x30);
    assert!((keep - 1.0).abs() < 0.1, "30 Hz kept ratio {keep}");
}

#[test]
fn notch_spectral_peak_ratio_drops() {
    let fs = 500.0;
    let n = 4000;
    let x: Vec<f64> = sine(30.0, fs, n)
        .iter()
        .zip(sine(50.0, fs, n))
        .map(|(a, b)| a + b)
        .collect();
    let out = notch(&rec_from_rows(vec![x.clone()], fs), &[50.0, 100.0]).unwrap();
    let y = out.data.row(0).to_vec();
    let before = periodogram_power(&x, 50.0, fs) / periodogram_power(&x, 30.0, fs);
    let after = periodogram_power(&y, 50.0, fs) / periodogram_power(&y, 30.0, fs);
    assert!(before / after >= 10.0, "peak ratio only dropped {}x", before / after);
}

#[test]
fn notch_invalid_frequency_errors() {
    let rec = rec_from_rows(vec![sine(10.0, 500.0, 100)], 500.0);
    assert!(notch(&rec, &[250.0]).is_err());
}

#[test]
fn resample_ramp_is_fixed_point() {
    // angle(t) = t degrees, 30 Hz -> 500 Hz
    let n = 90;
    let angles: Vec<f64> = (0..n).map(|i| i as f64 / 30.0).collect();
    let track = KinematicsTrack::new(
        Array2::from_shape_vec((1, n), angles).unwrap(),
        30.0,
        vec!["j0".into()],
    )
    .unwrap();
    let out = resample_linear(&track, 500.0).unwrap();
    assert_eq!(out.fs, 500.0);
    for k in 0..out.n_samples() {
        let t = k as f64 / 500.0;
        assert!((out.angles[[0, k]] - t).abs() < 1e-12);
    }
    // duration preserved within one output sample
    let dur_in = (n - 1) as f64 / 30.0;
    let dur_out = (out.n_samples() - 1) as f64 / 500.0;
    assert!((dur_in - dur_out).abs() <= 1.0 / 500.0 + 1e-12);
}

#[test]
fn resample_constant_track() {
    let track = KinematicsTrack::new(Array2::from_elem((2, 10), 42.0), 30.0, vec!["a".into(), "b".into()]).unwrap();
    let out = resample_linear(&track, 777.0).unwrap();
    assert!(out.angles.iter().all(|&v| (v - 42.0).abs() < 1e-12));
}

#[test]
fn resample_two_samples_definition() {
    let track = KinematicsTrack::new(array![[0.0, 10.0]], 1.0, vec!["j".into()]).unwrap();
    let out = resample_linear(&track, 500.0).unwrap();
    assert_eq!(out.n_samples(), 501);
    for k in 0..=500 {
        assert!((out.angles[[0, k]] - 10.0 * k as f64 / 500.0).abs() < 1e-12);
    }
}

#[test]
fn resample_single_sample_errors() {
    let track = KinematicsTrack::new(array![[1.0]], 1.0, vec!["j".into()]).unwrap();
    assert!(matches!(resample_linear(&track, 500.0), Err(Error::InsufficientData(_))));
}

#[test]
fn resample_identity_at_equal_fs() {
    let track = KinematicsTrack::new(array![[0.0, 3.5, 2.25, 9.0]], 30.0, vec!["j".into()]).unwrap();
    let out = resample_linear(&track, 30.0).unwrap();
    assert_eq!(out, track);
}

#[test]
fn car_examples() {
    let rec = rec_from_rows(vec![vec![1.0, 5.0], vec![3.0, 5.0]], 10.0);
    let out = common_average_reference(&rec).unwrap();
    assert_eq!(out.data, array![[-1.0, 0.0], [1.0, 0.0]]);

    let same = rec_from_rows(vec![vec![2.0; 5]; 4], 10.0);
    let out = common_average_reference(&same).unwrap();
    assert!(out.data.iter().all(|&v| v == 0.0));

    let noise = rec_from_rows((0..8).map(|c| deterministic_noise(1000, c + 1)).collect(), 10.0);
    let out = common_average_reference(&noise).unwrap();
    for col in out.data.columns() {
        assert!(col.mean().unwrap().abs() < 1e-12);
    }
}

#[test]
fn car_single_channel_errors() {
    let rec = rec_from_rows(vec![vec![1.0, 2.0]], 10.0);
    assert!(common_average_reference(&rec).is_err());
}

#[test]
fn standardize_basic_and_degenerate() {
    let rec = rec_from_rows(vec![vec![2.0, 4.0]], 10.0);
    let (out, stats) = standardize_per_channel(&rec, None).unwrap();
    assert_eq!(stats.mean[0], 3.0);
    assert_eq!(stats.std[0], 1.0); // population std of [2, 4]
    assert_eq!(out.data, array![[-1.0, 1.0]]);

    let flat = rec_from_rows(vec![vec![7.0; 10]], 10.0);
    let (out, stats) = standardize_per_channel(&flat, None).unwrap();
    assert_eq!(stats.std[0], 1.0); // guard
    assert!(out.data.iter().all(|&v| v == 0.0));
}

#[test]
fn standardize_with_train_stats_is_affine() {
    let train = rec_from_rows(vec![deterministic_noise(500, 11)], 10.0);
    let (_, stats) = standardize_per_channel(&train, None).unwrap();
    let shift = 2.5;
    let shifted_data: Vec<f64> = train.data.row(0).iter().map(|v| v + shift).collect();
    let test = rec_from_rows(vec![shifted_data], 10.0);
    let (out, _) = standardize_per_channel(&test, Some(&stats)).unwrap();
    let mean_out = out.data.row(0).mean().unwrap();
    assert!((mean_out - shift / stats.std[0]).abs() < 1e-9);
}

#[test]
fn envelope_tracks_slow_amplitude_modulation() {
    let fs = 500.0;
    let n = 4000;
    let env_true: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * 0.5 * i as f64 / fs).sin())
        .collect();
    let x: Vec<f64> = (0..n)
        .map(|i| env_true[i] * (2.0 * std::f64::consts::PI * 70.0 * i as f64 / fs).sin())
        .collect();
    let out = envelope(&rec_from_rows(vec![x], fs)).unwrap();
    for t in n / 10..n - n / 10 {
        let rel = (out.data[[0, t]] - env_true[t]).abs() / env_true[t];
        assert!(rel < 0.05, "envelope relative error {rel} at {t}");
    }
}

#[test]
fn envelope_too_short_errors() {
    let rec = rec_from_rows(vec![vec![1.0; 4]], 10.0);
    assert!(matches!(envelope(&rec), Err(Error::InsufficientData(_))));
}

#[test]
fn sliding_window_arithmetic() {
    let w = sliding_windows(300.0, 100.0, 1000, 500.0);
    assert_eq!(w.len(), 18);
    assert_eq!(w[0], (0, 150));
    assert_eq!(w[17], (850, 1000));

    // exactly one window when window == signal
    assert_eq!(sliding_windows(300.0, 100.0, 150, 500.0).len(), 1);
    // longer than signal: empty, not error
    assert!(sliding_windows(300.0, 100.0, 100, 500.0).is_empty());
    // 10 windows of 300 ms stepping 100 ms span 1200 ms of context
    let w = sliding_windows(300.0, 100.0, 600, 500.0);
    assert_eq!(w.len(), 10);
    assert_eq!(w[9].1, 600); // (10 - 1) * 50 + 150 = 600 samples = 1200 ms
}

#[test]
fn moving_average_flat_is_identity() {
    let x = vec![3.0; 100];
    assert_eq!(moving_average(&x, 21), x);
}
