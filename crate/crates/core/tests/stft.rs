use avp_core::stft::{self, frame_count, frame_signal};
use avp_core::{AudioBuffer, StftConfig, WindowKind};
use proptest::prelude::*;

fn rect(window_ms: f64, hop_ms: f64) -> StftConfig {
    StftConfig {
        window_ms,
        hop_ms,
        window: WindowKind::Rectangular,
    }
}

#[test]
fn default_geometry_at_cd_rate() {
    let g = StftConfig::default().geometry(44_100).unwrap();
    assert_eq!(g.window_len, 485);
    assert_eq!(g.hop_len, 243);
    assert_eq!(g.num_bins(), 243);
}

#[test]
fn same_milliseconds_at_another_rate() {
    let g = StftConfig::default().geometry(48_000).unwrap();
    assert_eq!(g.window_len, 528);
    assert_eq!(g.hop_len, 264);
}

#[test]
fn twenty_frames_for_one_second() {
    let audio = AudioBuffer::new(vec![1.0; 1000], 1000).unwrap();
    let frames = frame_signal(&audio, &rect(100.0, 50.0)).unwrap();
    assert_eq!(frames.dim(), (20, 100));
    // last frame starts at 950 and holds 50 real samples
    assert!(frames.row(19).iter().take(50).all(|&x| x == 1.0));
    assert!(frames.row(19).iter().skip(50).all(|&x| x == 0.0));
}

#[test]
fn ramp_reassembles_with_hop_equal_window() {
    let ramp: Vec<f64> = (0..1000).map(f64::from).collect();
    let audio = AudioBuffer::new(ramp.clone(), 1000).unwrap();
    let frames = frame_signal(&audio, &rect(100.0, 100.0)).unwrap();
    let joined: Vec<f64> = frames.iter().copied().collect();
    assert_eq!(joined, ramp);
}

#[test]
fn dc_lands_in_bin_zero() {
    let audio = AudioBuffer::new(vec![0.25; 400], 1000).unwrap();
    let spec = stft::stft(&audio, &rect(100.0, 100.0)).unwrap();
    let mag = spec.magnitude();
    for row in mag.rows() {
        assert!((row[0] - 25.0).abs() < 1e-9);
        assert!(row.iter().skip(1).all(|&m| m < 25.0 * 1e-9));
    }
}

#[test]
fn bin_centred_sinusoid_peaks_at_its_bin() {
    let (sr, n, m, a) = (1000.0, 100usize, 7usize, 0.6);
    let x: Vec<f64> = (0..1000)
        .map(|i| a * (2.0 * std::f64::consts::PI * m as f64 * sr / n as f64 * i as f64 / sr).sin())
        .collect();
    let audio = AudioBuffer::new(x, 1000).unwrap();
    let mag = stft::stft(&audio, &rect(100.0, 100.0)).unwrap().magnitude();
    for row in mag.rows() {
        let expected = a * n as f64 / 2.0;
        assert!((row[m] - expected).abs() <= 1e-6 * expected);
        let rest: f64 = row.iter().enumerate().filter(|&(k, _)| k != m).map(|(_, v)| v).sum();
        assert!(rest < 1e-6 * expected);
    }
}

#[test]
fn silence_has_zero_magnitude() {
    let audio = AudioBuffer::new(vec![0.0; 2000], 44_100).unwrap();
    let spec = stft::stft(&audio, &StftConfig::default()).unwrap();
    assert!(spec.magnitude().iter().all(|&m| m == 0.0));
}

#[test]
fn frame_times_step_by_hop() {
    let audio = AudioBuffer::new(vec![0.1; 44_100], 44_100).unwrap();
    let spec = stft::stft(&audio, &StftConfig::default()).unwrap();
    let hop = spec.geometry().hop_sec();
    assert_eq!(spec.frame_times()[0], 0.0);
    for w in spec.frame_times().windows(2) {
        assert!((w[1] - w[0] - hop).abs() < 1e-12);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let audio = AudioBuffer::new(vec![0.0; 100], 1000).unwrap();
    assert!(stft::stft(&audio, &rect(10.0, 20.0)).is_err());
    assert!(stft::stft(&audio, &rect(0.0, 0.0)).is_err());
    // one sample per window at 1 kHz
    assert!(stft::stft(&audio, &rect(1.0, 1.0)).is_err());
    let empty = AudioBuffer::new(vec![], 1000).unwrap();
    assert!(stft::stft(&empty, &rect(100.0, 50.0)).is_err());
    assert!(AudioBuffer::new(vec![f64::NAN], 1000).is_err());
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..3000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frame_count_formula(len in 1usize..100_000, win in 2usize..2048, hop_frac in 0.05f64..=1.0) {
        let hop = ((win as f64 * hop_frac) as usize).max(1);
        let n = frame_count(len, win, hop);
        if len <= win {
            prop_assert_eq!(n, 1);
        } else {
            // every sample is covered and the last frame starts inside the signal
            prop_assert!((n - 1) * hop < len);
            prop_assert!(n * hop >= len);
        }
    }

    #[test]
    fn parseval_per_frame(x in signal()) {
        let audio = AudioBuffer::new(x, 1000).unwrap();
        let cfg = rect(64.0, 32.0);
        let frames = frame_signal(&audio, &cfg).unwrap();
        let spec = stft::stft(&audio, &cfg).unwrap();
        let n = 64.0;
        for (f, b) in frames.rows().into_iter().zip(spec.bins().rows()) {
            let time: f64 = f.iter().map(|v| v * v).sum();
            let p: Vec<f64> = b.iter().map(|c| c.norm_sqr()).collect();
            let last = p.len() - 1;
            let freq = (p[0] + p[last] + 2.0 * p[1..last].iter().sum::<f64>()) / n;
            prop_assert!((time - freq).abs() <= 1e-9 * (1.0 + time));
        }
    }

    #[test]
    fn transform_is_linear(pair in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..2000), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (x, y): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let cfg = StftConfig::default();
        let sx = stft::stft(&AudioBuffer::new(x, 44_100).unwrap(), &cfg).unwrap();
        let sy = stft::stft(&AudioBuffer::new(y, 44_100).unwrap(), &cfg).unwrap();
        let sz = stft::stft(&AudioBuffer::new(z, 44_100).unwrap(), &cfg).unwrap();
        for ((cx, cy), cz) in sx.bins().iter().zip(sy.bins()).zip(sz.bins()) {
            let expect = cx * a + cy * b;
            prop_assert!((expect - cz).norm() <= 1e-9 * (1.0 + cz.norm()));
        }
    }

    #[test]
    fn magnitude_matches_components(x in signal()) {
        let spec = stft::stft(&AudioBuffer::new(x, 8000).unwrap(), &StftConfig::default()).unwrap();
        let mag = stft::magnitude(&spec);
        for (m, c) in mag.iter().zip(spec.bins()) {
            prop_assert!((m * m - (c.re * c.re + c.im * c.im)).abs() <= 1e-12 * (1.0 + m * m));
        }
    }
}
