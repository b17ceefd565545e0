use avp_core::odf::{self, import_external_curve};
use avp_core::peaks::{self, min_separation_filter, pick_peaks, refine_onsets, select_refinement_window};
use avp_core::{stft, AudioBuffer, EvalReport, OnsetList, PeakConfig, StftConfig};
use proptest::prelude::*;

fn curve(values: Vec<f64>) -> avp_core::OnsetCurve {
    let times = (0..values.len()).map(|i| i as f64 * 0.01).collect();
    import_external_curve(values, times).unwrap()
}

fn report(f1: f64, mad_sec: f64) -> EvalReport {
    EvalReport {
        f1,
        mad_sec,
        ..EvalReport::default()
    }
}

#[test]
fn picking_examples() {
    let on = pick_peaks(&curve(vec![0.0, 1.0, 0.0]), &PeakConfig::with_threshold(0.5)).unwrap();
    assert_eq!(on.times(), &[0.01]);
    let on = pick_peaks(&curve(vec![0.1, 0.4, 0.2]), &PeakConfig::with_threshold(0.5)).unwrap();
    assert!(on.is_empty());
    let on = pick_peaks(&curve(vec![0.0, 0.9, 0.9, 0.0]), &PeakConfig::with_threshold(0.5)).unwrap();
    assert_eq!(on.times(), &[0.01]);
}

#[test]
fn picking_rejects_bad_threshold() {
    assert!(pick_peaks(&curve(vec![0.0, 1.0]), &PeakConfig::with_threshold(1.5)).is_err());
    assert!(pick_peaks(&curve(vec![0.0, 1.0]), &PeakConfig::with_threshold(f64::NAN)).is_err());
}

#[test]
fn separation_examples() {
    let on = OnsetList::unlabeled(vec![0.00, 0.05, 0.12, 0.30]).unwrap();
    assert_eq!(min_separation_filter(&on, 0.090).unwrap().times(), &[0.00, 0.12, 0.30]);
    assert_eq!(min_separation_filter(&on, 0.0).unwrap(), on);
    let one = OnsetList::unlabeled(vec![3.0]).unwrap();
    assert_eq!(min_separation_filter(&one, 100.0).unwrap(), one);
    assert_eq!(peaks::NEURAL_MIN_SEPARATION_SEC, 0.090);
}

#[test]
fn refinement_pulls_late_prediction_back_to_click() {
    let mut x = vec![0.0; 88_200];
    x[44_100] = 0.9;
    let audio = AudioBuffer::new(x, 44_100).unwrap();
    let s = stft::stft(&audio, &StftConfig::default()).unwrap();
    let sf = odf::spectral_flux(&s);
    let hop = s.geometry().hop_sec();
    let predicted = OnsetList::unlabeled(vec![1.015]).unwrap();
    let refined = refine_onsets(&predicted, &sf, 0.040);
    assert_eq!(refined.len(), 1);
    assert!((refined.times()[0] - 1.0).abs() <= hop, "{:?}", refined.times());
    assert_eq!(refine_onsets(&predicted, &sf, 0.0), predicted);
}

#[test]
fn refinement_window_rule() {
    let baseline = report(0.90, 0.017);
    let table = [(0.01, report(0.80, 0.009)), (0.02, report(0.70, 0.008))];
    let eval = |w: f64| table.iter().find(|(c, _)| *c == w).unwrap().1;
    assert_eq!(select_refinement_window(&[0.01, 0.02], &baseline, eval).window_sec, 0.0);

    let table = [(0.01, report(0.80, 0.009)), (0.02, report(0.895, 0.012))];
    let eval = |w: f64| table.iter().find(|(c, _)| *c == w).unwrap().1;
    assert_eq!(select_refinement_window(&[0.01, 0.02], &baseline, eval).window_sec, 0.02);

    let table = [(0.01, report(0.90, 0.014)), (0.02, report(0.91, 0.011))];
    let eval = |w: f64| table.iter().find(|(c, _)| *c == w).unwrap().1;
    let choice = select_refinement_window(&[0.01, 0.02], &baseline, eval);
    assert_eq!(choice.window_sec, 0.02);
    assert_eq!(choice.candidates.len(), 2);
}

fn onset_list() -> impl Strategy<Value = OnsetList> {
    prop::collection::vec(0.001f64..0.5, 0..40).prop_map(|gaps| {
        let times = gaps
            .iter()
            .scan(0.0, |t, g| {
                *t += g;
                Some(*t)
            })
            .collect();
        OnsetList::unlabeled(times).unwrap()
    })
}

fn is_subsequence(sub: &[f64], full: &[f64]) -> bool {
    let mut it = full.iter();
    sub.iter().all(|s| it.any(|f| f == s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn separation_filter_properties(on in onset_list(), sep in 0.0f64..0.3) {
        let once = min_separation_filter(&on, sep).unwrap();
        let twice = min_separation_filter(&once, sep).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.times().windows(2).all(|w| w[1] - w[0] >= sep));
        prop_assert!(is_subsequence(once.times(), on.times()));
        if !on.is_empty() {
            prop_assert_eq!(once.times()[0], on.times()[0]);
        }
    }

    #[test]
    fn peaks_sit_on_frame_starts(values in prop::collection::vec(0.0f64..1.0, 1..300), threshold in 0.0f64..=1.0, half in 0usize..4) {
        let c = curve(values).normalized();
        let cfg = PeakConfig { threshold, min_separation_sec: 0.0, local_window_frames: 2 * half + 1 };
        let on = pick_peaks(&c, &cfg).unwrap();
        for t in on.times() {
            let n = c.frame_times().iter().position(|f| f == t);
            prop_assert!(n.is_some());
            prop_assert!(c.values()[n.unwrap()] >= threshold);
        }
    }

    #[test]
    fn picking_ignores_affine_rescale(values in prop::collection::vec(0.0f64..1.0, 1..300), a in 0.01f64..100.0, b in -10.0f64..10.0, threshold in 0.0f64..=1.0) {
        let c = curve(values.clone()).normalized();
        let d = curve(values.iter().map(|v| a * v + b).collect()).normalized();
        let cfg = PeakConfig::with_threshold(threshold);
        // rescaling can move values by an ulp; compare only away from the threshold
        let near = c.values().iter().any(|v| (v - threshold).abs() < 1e-9);
        prop_assume!(!near);
        prop_assert_eq!(pick_peaks(&c, &cfg).unwrap(), pick_peaks(&d, &cfg).unwrap());
    }

    #[test]
    fn refinement_moves_at_most_half_a_window(on in onset_list(), values in prop::collection::vec(0.0f64..1.0, 1..400), window in 0.0f64..0.2) {
        let sf = curve(values);
        let refined = refine_onsets(&on, &sf, window);
        prop_assert!(refined.len() <= on.len());
        prop_assert!(refined.times().windows(2).all(|w| w[0] < w[1]));
        for r in refined.times() {
            let nearest = on.times().iter().map(|t| (t - r).abs()).fold(f64::MAX, f64::min);
            prop_assert!(nearest <= window / 2.0 + 1e-12);
        }
    }
}
