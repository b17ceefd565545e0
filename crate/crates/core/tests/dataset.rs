use std::fs;
use std::path::Path;

use avp_core::dataset::{
    self, build_index, dataset_stats, parse_annotations, read_audio, serialize_annotations, write_wav,
    write_wav_channels, DatasetCorpus, FileKind, Modality, StatsColumn,
};
use avp_core::{AudioBuffer, Corpus, Error, Label, OnsetList};
use proptest::prelude::*;
use tempfile::tempdir;

fn sine(len: usize, sr: f64, amp: f64) -> Vec<f64> {
    (0..len)
        .map(|i| amp * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr).sin())
        .collect()
}

fn put(root: &Path, rel: &str, onsets: &[(f64, Label)]) {
    let audio = root.join(rel);
    fs::create_dir_all(audio.parent().unwrap()).unwrap();
    write_wav(&audio, &AudioBuffer::new(vec![0.0; 4410], 44_100).unwrap(), 16).unwrap();
    let text: String = onsets.iter().map(|(t, l)| format!("{t}\t{l}\n")).collect();
    fs::write(audio.with_extension("csv"), text).unwrap();
}

#[test]
fn sixteen_bit_sine_reads_back() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("a440.wav");
    let x = sine(44_100, 44_100.0, 0.5);
    write_wav(&path, &AudioBuffer::new(x.clone(), 44_100).unwrap(), 16).unwrap();
    let a = read_audio(&path).unwrap();
    assert_eq!(a.len(), 44_100);
    assert_eq!(a.sample_rate(), 44_100);
    let peak = a.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((peak - 0.5).abs() < 1.0 / 32_768.0 + 1e-9);
    assert!(a.samples().iter().zip(&x).all(|(p, q)| (p - q).abs() <= 1.0 / 32_768.0));
}

#[test]
fn opposite_stereo_channels_cancel() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("st.wav");
    let x = sine(4410, 44_100.0, 0.3);
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    write_wav_channels(&path, &[&x, &neg], 44_100, 16).unwrap();
    let a = read_audio(&path).unwrap();
    assert_eq!(a.len(), 4410);
    assert!(a.samples().iter().all(|&v| v == 0.0));
}

#[test]
fn bit_depths_agree() {
    let dir = tempdir().unwrap();
    let x = AudioBuffer::new(sine(8000, 16_000.0, 0.7), 16_000).unwrap();
    let (p16, p24) = (dir.path().join("16.wav"), dir.path().join("24.wav"));
    write_wav(&p16, &x, 16).unwrap();
    write_wav(&p24, &x, 24).unwrap();
    let (a, b) = (read_audio(&p16).unwrap(), read_audio(&p24).unwrap());
    assert!(a.samples().iter().zip(b.samples()).all(|(p, q)| (p - q).abs() <= 2f64.powi(-15)));
}

#[test]
fn bad_audio_is_a_data_error() {
    let dir = tempdir().unwrap();
    let text = dir.path().join("notes.wav");
    fs::write(&text, "not a wav file").unwrap();
    let err = read_audio(&text).unwrap_err();
    assert!(err.is_data_error(), "{err:?}");

    let full = dir.path().join("full.wav");
    write_wav(&full, &AudioBuffer::new(vec![0.1; 1000], 8000).unwrap(), 16).unwrap();
    let bytes = fs::read(&full).unwrap();
    let cut = dir.path().join("cut.wav");
    fs::write(&cut, &bytes[..bytes.len() - 301]).unwrap();
    assert!(read_audio(&cut).unwrap_err().is_data_error());

    assert!(read_audio(&dir.path().join("missing.wav")).unwrap_err().is_data_error());
}

#[test]
fn empty_tree_indexes_to_nothing() {
    let dir = tempdir().unwrap();
    let index = build_index(dir.path()).unwrap();
    assert!(index.entries.is_empty());
    assert!(!index.validate().is_ok());
    let stats = dataset_stats(&index).unwrap();
    assert_eq!(stats.all.total(), 0);
}

#[test]
fn orphan_audio_is_reported() {
    let dir = tempdir().unwrap();
    put(dir.path(), "Personal/Participant_1/P1_Kick_Personal.wav", &[(0.1, Label::Kd)]);
    let lonely = dir.path().join("Personal/Participant_1/P1_Snare_Personal.wav");
    write_wav(&lonely, &AudioBuffer::new(vec![0.0; 100], 8000).unwrap(), 16).unwrap();
    match build_index(dir.path()) {
        Err(Error::Orphans(paths)) => assert_eq!(paths, vec![lonely]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn synthetic_tree_index_stats_and_corpus() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    put(root, "Personal/Participant_1/P1_Kick_Personal.wav", &[(0.1, Label::Kd), (0.3, Label::Kd)]);
    put(root, "Fixed/Participant_1/P1_HHC_Fixed.wav", &[(0.05, Label::Hhc)]);
    put(
        root,
        "Personal/Participant_2/P2_Improv_Personal.wav",
        &[(0.02, Label::Kd), (0.04, Label::Sd), (0.06, Label::Hho)],
    );
    put(root, "Discarded/Fixed/Participant_9/P9_Snare_Fixed.wav", &[(0.01, Label::Sd)]);
    // unlabelled single-class file counts toward its class
    let p = root.join("Fixed/Participant_2/P2_HHO_Fixed.wav");
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    write_wav(&p, &AudioBuffer::new(vec![0.0; 441], 44_100).unwrap(), 16).unwrap();
    fs::write(p.with_extension("txt"), "0.01\n0.02\n0.03\n").unwrap();

    let index = build_index(root).unwrap();
    assert_eq!(index, build_index(root).unwrap());
    assert_eq!(index.entries.len(), 5);
    assert!(index.unrecognized.is_empty());
    assert_eq!(index.participants().into_iter().collect::<Vec<_>>(), vec![1, 2, 9]);
    assert_eq!(index.discarded_participants().into_iter().collect::<Vec<_>>(), vec![9]);
    let kick = index
        .entries
        .iter()
        .find(|e| e.kind == FileKind::Single(Label::Kd))
        .unwrap();
    assert_eq!((kick.participant, kick.modality), (1, Modality::Personal));
    let issues = index.validate().issues;
    assert!(issues.iter().any(|i| i.contains("participants")));

    let stats = dataset_stats(&index).unwrap();
    assert_eq!(stats.all.get(Label::Kd, StatsColumn::Personal), 2);
    assert_eq!(stats.all.get(Label::Kd, StatsColumn::Improvisation), 1);
    assert_eq!(stats.all.get(Label::Hho, StatsColumn::Fixed), 3);
    assert_eq!(stats.all.get(Label::Sd, StatsColumn::Fixed), 1);
    assert_eq!(stats.excluding_discarded.get(Label::Sd, StatsColumn::Fixed), 0);
    assert_eq!(stats.all.total(), 10);
    assert_eq!(stats.excluding_discarded.total(), 9);

    // recount by walking the annotation files directly
    let mut recount = 0;
    for e in walkdir::WalkDir::new(root) {
        let path = e.unwrap().into_path();
        if matches!(path.extension().and_then(|x| x.to_str()), Some("csv" | "txt")) {
            recount += parse_annotations(&fs::read_to_string(&path).unwrap()).unwrap().onsets.len();
        }
    }
    assert_eq!(recount, stats.all.total());
    let rows: usize = Label::ALL.iter().map(|&l| stats.all.row_total(l)).sum();
    assert_eq!(rows, recount);

    let corpus = DatasetCorpus::new(&index, false);
    let ids = corpus.ids();
    assert_eq!(ids.len(), 4);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let item = corpus.load(&ids[0]).unwrap();
    assert!(item.audio.is_some() && item.reference.is_some());
    assert_eq!(DatasetCorpus::new(&index, true).ids().len(), 5);
}

#[test]
fn annotation_files_load_strictly_increasing() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("a.csv");
    fs::write(&p, "0.9,sd\n0.1,kd\n").unwrap();
    let a = dataset::load_annotations(&p).unwrap();
    assert!(a.reordered);
    assert!(a.onsets.times().windows(2).all(|w| w[0] < w[1]));
    fs::write(&p, "0.9,cowbell\n").unwrap();
    assert!(dataset::load_annotations(&p).unwrap_err().is_data_error());
}

fn labelled_onsets() -> impl Strategy<Value = OnsetList> {
    prop::collection::vec((1e-4f64..2.0, 0usize..4), 0..60).prop_flat_map(|v| {
        let times: Vec<f64> = v
            .iter()
            .scan(0.0, |t, (g, _)| {
                *t += g;
                Some(*t)
            })
            .collect();
        let labels: Vec<Label> = v.iter().map(|&(_, l)| Label::ALL[l]).collect();
        any::<bool>().prop_map(move |with_labels| {
            OnsetList::new(times.clone(), with_labels.then(|| labels.clone())).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn annotation_round_trip(on in labelled_onsets()) {
        let text = serialize_annotations(&on);
        let back = parse_annotations(&text).unwrap();
        prop_assert!(!back.reordered);
        prop_assert_eq!(&back.onsets, &on);
        prop_assert_eq!(serialize_annotations(&back.onsets), text);
    }

    #[test]
    fn comma_and_tab_agree(on in labelled_onsets()) {
        let text = serialize_annotations(&on);
        let commas = parse_annotations(&text.replace('\t', ",")).unwrap();
        prop_assert_eq!(commas.onsets, on);
    }
}
