//! Loading the vocal percussion corpus: annotation text, WAV audio, the
//! participant/modality/file index and per-class utterance counts.
//!
//! The expected tree holds one folder per modality (`Personal`, `Fixed`) with
//! one subfolder per participant. Each participant records five files per
//! modality: four single-class files (kick, snare, closed and opened hi-hat)
//! and one improvisation. Every `.wav` sits next to an annotation file with the
//! same stem. Participants whose recordings were set aside live under a
//! `Discarded` folder somewhere on their path. All of these names are matched
//! with configurable regular expressions, see [`IndexPatterns`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::harness::{Corpus, EvalItem};
use crate::odf::{self, OnsetCurve};
use crate::peaks::{Label, OnsetList};
use crate::stft::AudioBuffer;

/// Participant count of the published corpus.
pub const EXPECTED_PARTICIPANTS: usize = 28;
/// Audio file count of the published corpus.
pub const EXPECTED_FILES: usize = 280;
/// Annotated utterances of the published corpus.
pub const EXPECTED_UTTERANCES: usize = 9780;
/// Files per participant and modality.
pub const FILES_PER_MODALITY: usize = 5;

/// Published per-class counts, rows kd/sd/hhc/hho and columns
/// personal/fixed/improvisation.
pub const EXPECTED_COUNTS: [[usize; 3]; 4] = [
    [799, 818, 1201],
    [813, 839, 811],
    [799, 833, 673],
    [816, 830, 548],
];

// ---------------------------------------------------------------------------
// annotations

/// Onsets read from one annotation file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub onsets: OnsetList,
    /// Set when the lines were not in time order and had to be sorted.
    pub reordered: bool,
}

/// Parses `time<SEP>label` lines, with `SEP` a tab or a comma and the label
/// optional. Blank lines and `#` comments are skipped. Either every line
/// carries a label or none does.
pub fn parse_annotations(text: &str) -> Result<AnnotationFile> {
    let mut rows: Vec<(f64, Option<Label>, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (time_field, label_field) = match line.find(['\t', ',']) {
            Some(pos) => (&line[..pos], Some(line[pos + 1..].trim())),
            None => (line, None),
        };
        let time: f64 = time_field.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad onset time `{}`", time_field.trim()),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("onset time {time} out of range"),
            });
        }
        let label = match label_field {
            None | Some("") => None,
            Some(l) => Some(l.parse::<Label>().map_err(|label| Error::UnknownLabel {
                line: line_no,
                label,
            })?),
        };
        rows.push((time, label, line_no));
    }

    let labelled = rows.iter().filter(|r| r.1.is_some()).count();
    if labelled != 0 && labelled != rows.len() {
        let line = rows.iter().find(|r| r.1.is_none()).map(|r| r.2).unwrap_or(0);
        return Err(Error::Parse {
            line,
            message: "missing label in a labelled annotation file".into(),
        });
    }

    let reordered = rows.windows(2).any(|w| w[1].0 < w[0].0);
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(Error::Parse {
            line: w[1].2,
            message: format!("duplicate onset time {}", w[1].0),
        });
    }
    let times = rows.iter().map(|r| r.0).collect();
    let labels = (labelled > 0).then(|| rows.iter().map(|r| r.1.expect("checked")).collect());
    Ok(AnnotationFile {
        onsets: OnsetList::new(times, labels)?,
        reordered,
    })
}

/// Tab-separated `time\tlabel` lines (time only when unlabelled). Times are
/// written in shortest round-trip form.
pub fn serialize_annotations(onsets: &OnsetList) -> String {
    let mut out = String::new();
    for (i, t) in onsets.times().iter().enumerate() {
        match onsets.labels() {
            Some(l) => {
                let _ = writeln!(out, "{t}\t{}", l[i]);
            }
            None => {
                let _ = writeln!(out, "{t}");
            }
        }
    }
    out
}

pub fn load_annotations(path: &Path) -> Result<AnnotationFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_annotations(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        },
        Error::UnknownLabel { line, label } => Error::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: unknown label `{label}`"),
        },
        other => other,
    })?;
    if parsed.reordered {
        log::warn!("{}: onsets were out of order and have been sorted", path.display());
    }
    Ok(parsed)
}

/// Reads an external activation curve file (`time<TAB>value` lines).
pub fn load_curve(path: &Path) -> Result<OnsetCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    odf::parse_curve_text(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// audio

/// Reads a 16- or 24-bit linear PCM WAV file. Samples are scaled to
/// `[-1, 1)` and multichannel audio is averaged down to mono.
pub fn read_audio(path: &Path) -> Result<AudioBuffer> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(BufReader::new(file)).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

fn decode_wav<R: Read>(reader: R) -> std::result::Result<AudioBuffer, String> {
    let wav = hound::WavReader::new(reader).map_err(|e| format!("not a readable WAV file: {e}"))?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err("floating-point WAV data is not supported; expected linear PCM".into());
    }
    if spec.bits_per_sample != 16 && spec.bits_per_sample != 24 {
        return Err(format!(
            "{}-bit PCM is not supported; expected 16 or 24 bits",
            spec.bits_per_sample
        ));
    }
    if spec.channels == 0 {
        return Err("header declares zero channels".into());
    }
    let channels = spec.channels as usize;
    let scale = 1.0 / (1u32 << (spec.bits_per_sample - 1)) as f64;
    let expected = wav.len() as usize;
    let mut interleaved = Vec::with_capacity(expected);
    for s in wav.into_samples::<i32>() {
        match s {
            Ok(v) => interleaved.push(v as f64 * scale),
            Err(e) => {
                return Err(format!(
                    "truncated or corrupt data after {} of {expected} samples: {e}",
                    interleaved.len()
                ))
            }
        }
    }
    if interleaved.len() % channels != 0 {
        return Err("data chunk ends inside a sample frame".into());
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|f| f.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioBuffer::new(mono, spec.sample_rate).map_err(|e| e.to_string())
}

/// Writes mono audio as 16- or 24-bit PCM, clipping to the representable range.
pub fn write_wav(path: &Path, audio: &AudioBuffer, bits: u16) -> Result<()> {
    write_wav_channels(path, &[audio.samples()], audio.sample_rate(), bits)
}

/// Writes equally long channels interleaved into one PCM file.
pub fn write_wav_channels(path: &Path, channels: &[&[f64]], sample_rate: u32, bits: u16) -> Result<()> {
    if bits != 16 && bits != 24 {
        return Err(Error::InvalidConfig(format!("cannot write {bits}-bit PCM")));
    }
    if channels.is_empty() || channels.iter().any(|c| c.len() != channels[0].len()) {
        return Err(Error::Validation("channels must be non-empty and equally long".into()));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: bits,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_err)?;
    let full = (1i64 << (bits - 1)) as f64;
    for i in 0..channels[0].len() {
        for c in channels {
            let v = (c[i] * full).round().clamp(-full, full - 1.0) as i32;
            w.write_sample(v).map_err(to_err)?;
        }
    }
    w.finalize().map_err(to_err)
}

// ---------------------------------------------------------------------------
// index

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Personal,
    Fixed,
}

/// What a recording contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Single(Label),
    Improvisation,
}

/// Regular expressions used to classify paths. Matching is done on path
/// components (folders and file stem); the first capture group of
/// `participant` must be the participant number.
#[derive(Debug, Clone)]
pub struct IndexPatterns {
    pub audio_extension: String,
    /// Annotation extensions tried in order next to each audio file.
    pub annotation_extensions: Vec<String>,
    pub participant: Regex,
    pub personal: Regex,
    pub fixed: Regex,
    pub discarded: Regex,
    pub kick: Regex,
    pub snare: Regex,
    pub hhc: Regex,
    pub hho: Regex,
    pub improvisation: Regex,
}

impl Default for IndexPatterns {
    fn default() -> Self {
        let re = |s: &str| Regex::new(s).expect("valid default pattern");
        Self {
            audio_extension: "wav".into(),
            annotation_extensions: vec!["csv".into(), "txt".into()],
            participant: re(r"(?i)^(?:participant[_\- ]?|p)(\d+)(?:$|[_\- ])"),
            personal: re(r"(?i)(?:^|[_\- ])personal(?:$|[_\- ])"),
            fixed: re(r"(?i)(?:^|[_\- ])fixed(?:$|[_\- ])"),
            discarded: re(r"(?i)^discarded$"),
            kick: re(r"(?i)(?:^|[_\- ])(?:kick|kd)(?:$|[_\- ])"),
            snare: re(r"(?i)(?:^|[_\- ])(?:snare|sd)(?:$|[_\- ])"),
            hhc: re(r"(?i)(?:^|[_\- ])(?:hhc|closed[_\- ]?hi[_\- ]?hat)(?:$|[_\- ])"),
            hho: re(r"(?i)(?:^|[_\- ])(?:hho|open(?:ed)?[_\- ]?hi[_\- ]?hat)(?:$|[_\- ])"),
            improvisation: re(r"(?i)(?:^|[_\- ])improv(?:isation|isations|ization)?(?:$|[_\- ])"),
        }
    }
}

impl IndexPatterns {
    fn classify_kind(&self, stem: &str) -> Option<FileKind> {
        if self.improvisation.is_match(stem) {
            Some(FileKind::Improvisation)
        } else if self.hhc.is_match(stem) {
            Some(FileKind::Single(Label::Hhc))
        } else if self.hho.is_match(stem) {
            Some(FileKind::Single(Label::Hho))
        } else if self.kick.is_match(stem) {
            Some(FileKind::Single(Label::Kd))
        } else if self.snare.is_match(stem) {
            Some(FileKind::Single(Label::Sd))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub audio_path: PathBuf,
    pub annotation_path: PathBuf,
    pub participant: u32,
    pub modality: Modality,
    pub kind: FileKind,
    pub discarded: bool,
}

/// Every recording found under a root, ordered by path.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<IndexEntry>,
    /// Audio files whose path did not reveal participant, modality or class.
    pub unrecognized: Vec<PathBuf>,
}

impl DatasetIndex {
    pub fn participants(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.participant).collect()
    }

    pub fn discarded_participants(&self) -> BTreeSet<u32> {
        self.entries
            .iter()
            .filter(|e| e.discarded)
            .map(|e| e.participant)
            .collect()
    }

    /// Entries used for evaluation: discarded ones only when asked for.
    pub fn evaluation_entries(&self, include_discarded: bool) -> impl Iterator<Item = &IndexEntry> {
        self.entries
            .iter()
            .filter(move |e| include_discarded || !e.discarded)
    }

    /// Structural checks against the published corpus layout.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        if self.entries.is_empty() {
            issues.push(format!("no recordings found under {}", self.root.display()));
        }
        let participants = self.participants();
        if participants.len() != EXPECTED_PARTICIPANTS {
            issues.push(format!(
                "{} participants, expected {EXPECTED_PARTICIPANTS}",
                participants.len()
            ));
        }
        if self.entries.len() != EXPECTED_FILES {
            issues.push(format!(
                "{} audio files, expected {EXPECTED_FILES}",
                self.entries.len()
            ));
        }
        let mut per_slot: BTreeMap<(u32, Modality), Vec<FileKind>> = BTreeMap::new();
        for e in &self.entries {
            per_slot.entry((e.participant, e.modality)).or_default().push(e.kind);
        }
        for ((p, m), kinds) in &per_slot {
            let distinct: BTreeSet<_> = kinds.iter().collect();
            if kinds.len() != FILES_PER_MODALITY || distinct.len() != FILES_PER_MODALITY {
                issues.push(format!(
                    "participant {p} {m:?}: {} files ({} distinct kinds), expected {FILES_PER_MODALITY}",
                    kinds.len(),
                    distinct.len()
                ));
            }
        }
        for path in &self.unrecognized {
            issues.push(format!("unrecognised file {}", path.display()));
        }
        ValidationReport { issues }
    }

    /// Structured text summary (one JSON object).
    pub fn summary_json(&self) -> String {
        let by_modality = |m| self.entries.iter().filter(|e| e.modality == m).count();
        serde_json::json!({
            "root": self.root,
            "files": self.entries.len(),
            "participants": self.participants().len(),
            "discarded_participants": self.discarded_participants(),
            "personal_files": by_modality(Modality::Personal),
            "fixed_files": by_modality(Modality::Fixed),
            "unrecognized": self.unrecognized,
            "issues": self.validate().issues,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Indexes `root` with the default patterns.
pub fn build_index(root: &Path) -> Result<DatasetIndex> {
    build_index_with(root, &IndexPatterns::default())
}

/// Indexes `root`, failing when any audio file lacks an annotation.
pub fn build_index_with(root: &Path, patterns: &IndexPatterns) -> Result<DatasetIndex> {
    let (index, orphans) = scan_index(root, patterns)?;
    if !orphans.is_empty() {
        return Err(Error::Orphans(orphans));
    }
    Ok(index)
}

/// Like [`build_index_with`] but returns audio files without annotations
/// alongside the index instead of failing.
pub fn scan_index(root: &Path, patterns: &IndexPatterns) -> Result<(DatasetIndex, Vec<PathBuf>)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let mut audio_files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        let path = entry.path();
        let is_audio = entry.file_type().is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case(&patterns.audio_extension));
        if is_audio {
            audio_files.push(path.to_path_buf());
        }
    }
    audio_files.sort();

    let mut entries = Vec::new();
    let mut orphans = Vec::new();
    let mut unrecognized = Vec::new();
    for audio_path in audio_files {
        let Some(annotation_path) = patterns
            .annotation_extensions
            .iter()
            .map(|ext| audio_path.with_extension(ext))
            .find(|p| p.is_file())
        else {
            orphans.push(audio_path);
            continue;
        };
        match classify(root, &audio_path, patterns) {
            Some((participant, modality, kind, discarded)) => entries.push(IndexEntry {
                audio_path,
                annotation_path,
                participant,
                modality,
                kind,
                discarded,
            }),
            None => unrecognized.push(audio_path),
        }
    }
    let index = DatasetIndex {
        root: root.to_path_buf(),
        entries,
        unrecognized,
    };
    Ok((index, orphans))
}

fn classify(
    root: &Path,
    path: &Path,
    patterns: &IndexPatterns,
) -> Option<(u32, Modality, FileKind, bool)> {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let stem = path.file_stem()?.to_str()?;
    let mut components: Vec<&str> = rel
        .parent()
        .into_iter()
        .flat_map(|p| p.components())
        .filter_map(|c| c.as_os_str().to_str())
        .collect();
    components.push(stem);

    // innermost match wins
    let participant = components.iter().rev().find_map(|c| {
        patterns
            .participant
            .captures(c)
            .and_then(|cap| cap.get(1))
            .and_then(|m| m.as_str().parse().ok())
    })?;
    let modality = components.iter().rev().find_map(|c| {
        if patterns.personal.is_match(c) {
            Some(Modality::Personal)
        } else if patterns.fixed.is_match(c) {
            Some(Modality::Fixed)
        } else {
            None
        }
    })?;
    let kind = patterns.classify_kind(stem)?;
    let discarded = components.iter().any(|c| patterns.discarded.is_match(c));
    Some((participant, modality, kind, discarded))
}

// ---------------------------------------------------------------------------
// statistics

/// Column of the per-class count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsColumn {
    Personal,
    Fixed,
    Improvisation,
}

impl StatsColumn {
    pub const ALL: [StatsColumn; 3] = [
        StatsColumn::Personal,
        StatsColumn::Fixed,
        StatsColumn::Improvisation,
    ];

    fn of(entry: &IndexEntry) -> Self {
        match (entry.kind, entry.modality) {
            (FileKind::Improvisation, _) => StatsColumn::Improvisation,
            (_, Modality::Personal) => StatsColumn::Personal,
            (_, Modality::Fixed) => StatsColumn::Fixed,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn title(self) -> &'static str {
        match self {
            StatsColumn::Personal => "Personal",
            StatsColumn::Fixed => "Fixed",
            StatsColumn::Improvisation => "Improvisation",
        }
    }
}

/// Utterance counts: rows kd/sd/hhc/hho, columns personal/fixed/improvisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountMatrix {
    pub cells: [[usize; 3]; 4],
    /// Onsets without a label that could not be attributed to a class.
    pub unlabeled: usize,
}

impl CountMatrix {
    pub fn get(&self, label: Label, column: StatsColumn) -> usize {
        self.cells[label_row(label)][column.index()]
    }

    pub fn row_total(&self, label: Label) -> usize {
        self.cells[label_row(label)].iter().sum()
    }

    pub fn column_total(&self, column: StatsColumn) -> usize {
        self.cells.iter().map(|r| r[column.index()]).sum()
    }

    /// Labelled cells plus unattributed onsets.
    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum::<usize>() + self.unlabeled
    }

    /// Table laid out as instrument rows by modality columns.
    pub fn to_delimited(&self, sep: char) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "label{sep}{}{sep}{}{sep}{}{sep}total",
            StatsColumn::Personal.title(),
            StatsColumn::Fixed.title(),
            StatsColumn::Improvisation.title()
        );
        for label in Label::ALL {
            let r = &self.cells[label_row(label)];
            let _ = writeln!(
                out,
                "{label}{sep}{}{sep}{}{sep}{}{sep}{}",
                r[0],
                r[1],
                r[2],
                self.row_total(label)
            );
        }
        let _ = writeln!(
            out,
            "total{sep}{}{sep}{}{sep}{}{sep}{}",
            self.column_total(StatsColumn::Personal),
            self.column_total(StatsColumn::Fixed),
            self.column_total(StatsColumn::Improvisation),
            self.total()
        );
        out
    }
}

fn label_row(label: Label) -> usize {
    match label {
        Label::Kd => 0,
        Label::Sd => 1,
        Label::Hhc => 2,
        Label::Hho => 3,
    }
}

/// Per-class counts with and without the discarded participants.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub all: CountMatrix,
    pub excluding_discarded: CountMatrix,
    pub files: usize,
    pub participants: usize,
}

/// Counts onsets per class and column from the annotation files. Unlabelled
/// onsets in single-class files count towards the file's class; unlabelled
/// improvisation onsets are tallied separately.
pub fn dataset_stats(index: &DatasetIndex) -> Result<DatasetStats> {
    let mut stats = DatasetStats {
        files: index.entries.len(),
        participants: index.participants().len(),
        ..DatasetStats::default()
    };
    for entry in &index.entries {
        let ann = load_annotations(&entry.annotation_path)?;
        let m = count_entry(entry, &ann.onsets);
        add_into(&mut stats.all, &m);
        if !entry.discarded {
            add_into(&mut stats.excluding_discarded, &m);
        }
    }
    Ok(stats)
}

fn count_entry(entry: &IndexEntry, onsets: &OnsetList) -> CountMatrix {
    let mut m = CountMatrix::default();
    let col = StatsColumn::of(entry).index();
    match (onsets.labels(), entry.kind) {
        (Some(labels), _) => {
            for &l in labels {
                m.cells[label_row(l)][col] += 1;
            }
        }
        (None, FileKind::Single(l)) => m.cells[label_row(l)][col] += onsets.len(),
        (None, FileKind::Improvisation) => m.unlabeled += onsets.len(),
    }
    m
}

fn add_into(acc: &mut CountMatrix, m: &CountMatrix) {
    for (a, b) in acc.cells.iter_mut().flatten().zip(m.cells.iter().flatten()) {
        *a += b;
    }
    acc.unlabeled += m.unlabeled;
}

// ---------------------------------------------------------------------------
// corpus adapter

/// Indexed recordings exposed to the evaluation harness. Ids are audio paths
/// relative to the dataset root.
#[derive(Debug, Clone)]
pub struct DatasetCorpus {
    root: PathBuf,
    entries: Vec<IndexEntry>,
    /// Optional folder of external activation curves, one per audio file,
    /// named `<audio stem>.<curve_extension>`.
    pub curve_dir: Option<PathBuf>,
    pub curve_extension: String,
}

impl DatasetCorpus {
    pub fn new(index: &DatasetIndex, include_discarded: bool) -> Self {
        Self {
            root: index.root.clone(),
            entries: index.evaluation_entries(include_discarded).cloned().collect(),
            curve_dir: None,
            curve_extension: "txt".into(),
        }
    }

    pub fn with_curve_dir(mut self, dir: PathBuf) -> Self {
        self.curve_dir = Some(dir);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn id_of(&self, e: &IndexEntry) -> String {
        e.audio_path
            .strip_prefix(&self.root)
            .unwrap_or(&e.audio_path)
            .to_string_lossy()
            .into_owned()
    }
}

impl Corpus for DatasetCorpus {
    fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| self.id_of(e)).collect();
        ids.sort();
        ids
    }

    fn load(&self, id: &str) -> Result<EvalItem> {
        let entry = self
            .entries
            .iter()
            .find(|e| self.id_of(e) == id)
            .ok_or_else(|| Error::Validation(format!("no entry `{id}`")))?;
        let audio = read_audio(&entry.audio_path)?;
        let reference = load_annotations(&entry.annotation_path)?.onsets;
        let external_curve = match &self.curve_dir {
            Some(dir) => {
                let stem = entry.audio_path.file_stem().unwrap_or_default();
                let path = dir.join(stem).with_extension(&self.curve_extension);
                Some(load_curve(&path)?)
            }
            None => None,
        };
        Ok(EvalItem {
            id: id.to_string(),
            audio: Some(audio),
            external_curve,
            reference: Some(reference),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_tab_and_comma() {
        let a = parse_annotations("0.512\tkd\n1.003\tsd").unwrap();
        assert_eq!(a.onsets.times(), &[0.512, 1.003]);
        assert_eq!(a.onsets.labels(), Some(&[Label::Kd, Label::Sd][..]));
        assert!(!a.reordered);

        let a = parse_annotations("0.5,hho").unwrap();
        assert_eq!(a.onsets.labels(), Some(&[Label::Hho][..]));
    }

    #[test]
    fn parse_comments_and_unlabelled() {
        let a = parse_annotations("# exported\n\n0.25\n0.75\n").unwrap();
        assert_eq!(a.onsets.times(), &[0.25, 0.75]);
        assert_eq!(a.onsets.labels(), None);
    }

    #[test]
    fn parse_sorts_and_flags() {
        let a = parse_annotations("1.0\tsd\n0.5\tkd\n").unwrap();
        assert!(a.reordered);
        assert_eq!(a.onsets.times(), &[0.5, 1.0]);
        assert_eq!(a.onsets.labels(), Some(&[Label::Kd, Label::Sd][..]));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_annotations("0.1\tkd\nabc\tkd\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_annotations("0.1\tkd\n\n0.2\tcowbell\n") {
            Err(Error::UnknownLabel { line: 3, label }) => assert_eq!(label, "cowbell"),
            other => panic!("{other:?}"),
        }
        assert!(parse_annotations("0.1\tkd\n0.1\tsd\n").is_err());
        assert!(parse_annotations("0.1\tkd\n0.2\n").is_err());
        assert!(parse_annotations("-1\tkd\n").is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let text = "0.1\tkd\n0.30000000000000004\thhc\n";
        let a = parse_annotations(text).unwrap();
        assert_eq!(serialize_annotations(&a.onsets), text);
    }

    #[test]
    fn default_patterns_classify_published_names() {
        let p = IndexPatterns::default();
        let root = Path::new("/data");
        let c = classify(root, Path::new("/data/Personal/Participant_7/P7_Kick_Personal.wav"), &p);
        assert_eq!(c, Some((7, Modality::Personal, FileKind::Single(Label::Kd), false)));
        let c = classify(root, Path::new("/data/Fixed/Participant_12/P12_HHO_Fixed.wav"), &p);
        assert_eq!(c, Some((12, Modality::Fixed, FileKind::Single(Label::Hho), false)));
        let c = classify(
            root,
            Path::new("/data/Discarded/Personal/Participant_3/P3_Improv_Personal.wav"),
            &p,
        );
        assert_eq!(c, Some((3, Modality::Personal, FileKind::Improvisation, true)));
        let c = classify(root, Path::new("/data/Fixed/Participant_1/P1_Snare_Fixed.wav"), &p);
        assert_eq!(c, Some((1, Modality::Fixed, FileKind::Single(Label::Sd), false)));
        assert_eq!(classify(root, Path::new("/data/notes.wav"), &p), None);
    }

    #[test]
    fn count_matrix_layout() {
        let mut m = CountMatrix::default();
        m.cells[0] = [1, 2, 3];
        m.cells[3] = [0, 0, 4];
        assert_eq!(m.get(Label::Kd, StatsColumn::Fixed), 2);
        assert_eq!(m.row_total(Label::Kd), 6);
        assert_eq!(m.column_total(StatsColumn::Improvisation), 7);
        let tsv = m.to_delimited('\t');
        assert_eq!(tsv.lines().next(), Some("label\tPersonal\tFixed\tImprovisation\ttotal"));
        assert_eq!(tsv.lines().nth(1), Some("kd\t1\t2\t3\t6"));
        assert_eq!(tsv.lines().last(), Some("total\t1\t2\t7\t10"));
    }

    #[test]
    fn published_table_sums_to_total() {
        let total: usize = EXPECTED_COUNTS.iter().flatten().sum();
        assert_eq!(total, EXPECTED_UTTERANCES);
    }
}
