//! `avp-onset`: detect, eval, sweep and stats commands.
//!
//! Exit codes are a stable contract: 0 on success, 1 for usage or
//! validation problems, 2 for unreadable or malformed data.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use avp_core::dataset::{self, DatasetCorpus, IndexPatterns};
use avp_core::harness::{evaluate_detector, sweep, SweepParam, SweepSpec, SweepTable};
use avp_core::peaks::select_refinement_window;
use avp_core::{Corpus, DetectorConfig, DetectorKind, EvalItem, EvalOutcome, InMemoryCorpus, StftConfig};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "avp-onset", version, about = "Onset detection and evaluation for vocal percussion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print detected onset times in seconds, one per line.
    Detect(DetectArgs),
    /// Score detections against annotations.
    Eval(EvalArgs),
    /// Evaluate evenly spaced values of one parameter.
    Sweep(SweepArgs),
    /// Count annotated utterances per class and recording type.
    Stats(StatsArgs),
}

/// Detector and post-processing flags shared by every command that detects.
#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// hfc, complex, spectral_flux or external.
    #[arg(long, default_value = "hfc", value_parser = parse_detector)]
    pub detector: DetectorKind,
    /// Peak threshold in [0, 1]. Defaults to 0.8 for hfc and 0.7 for complex.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 11.0)]
    pub frame_ms: f64,
    /// Defaults to half the frame.
    #[arg(long)]
    pub hop_ms: Option<f64>,
    /// Minimum gap between onsets. Defaults to 90 ms for external curves, 0 otherwise.
    #[arg(long)]
    pub min_sep_ms: Option<f64>,
    /// Spectral-flux refinement window, 0 disables.
    #[arg(long, default_value_t = 0.0)]
    pub refine_ms: f64,
}

impl DetectorArgs {
    pub fn config(&self) -> DetectorConfig {
        let mut c = DetectorConfig::new(self.detector);
        c.stft = StftConfig {
            hop_ms: self.hop_ms.unwrap_or(self.frame_ms / 2.0),
            ..StftConfig::with_window_ms(self.frame_ms)
        };
        if let Some(t) = self.threshold {
            c.peaks.threshold = t;
        }
        if let Some(ms) = self.min_sep_ms {
            c.peaks.min_separation_sec = ms / 1000.0;
        }
        c.refine_window_sec = self.refine_ms / 1000.0;
        c
    }
}

fn parse_detector(s: &str) -> Result<DetectorKind, String> {
    s.parse().map_err(|e: avp_core::Error| e.to_string())
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: avp_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// WAV file. Optional for the external detector without refinement.
    pub audio: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Activation curve (`time<TAB>value` lines) for the external detector.
    #[arg(long)]
    pub curve_file: Option<PathBuf>,
    /// Also write the onsets to this file.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

/// Where the recordings and annotations come from.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Dataset root to index.
    #[arg(long, conflicts_with_all = ["audio", "annotations"])]
    pub dataset: Option<PathBuf>,
    /// Single WAV file, scored against --annotations.
    #[arg(long, requires = "annotations")]
    pub audio: Option<PathBuf>,
    #[arg(long, requires = "audio")]
    pub annotations: Option<PathBuf>,
    /// Activation curve for a single file with the external detector.
    #[arg(long, conflicts_with = "dataset")]
    pub curve_file: Option<PathBuf>,
    /// Folder of activation curves named after each audio file (`<stem>.txt`).
    #[arg(long, requires = "dataset")]
    pub curve_dir: Option<PathBuf>,
    /// Evaluate the discarded participants too.
    #[arg(long)]
    pub include_discarded: bool,
    #[arg(long, default_value_t = 50.0)]
    pub tolerance_ms: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Append the full report as one JSON line.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// threshold, frame-ms, hop-ms, min-sep-ms or refine-ms.
    #[arg(long, value_parser = parse_param)]
    pub param: SweepParam,
    #[arg(long)]
    pub min: f64,
    #[arg(long)]
    pub max: f64,
    #[arg(long, default_value_t = SweepSpec::DEFAULT_NUM_VALUES)]
    pub num: usize,
    /// Write one JSON line per sweep value.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Dataset root.
    pub root: PathBuf,
    /// Write the counts as JSON.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

/// Why a command stopped, with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

impl From<avp_core::Error> for Failure {
    fn from(e: avp_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command, writing results
/// to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Detect(a) => cmd_detect(a, out),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Stats(a) => cmd_stats(a, out, err),
    }
}

fn cmd_detect(args: &DetectArgs, out: &mut dyn Write) -> Outcome {
    let config = args.detector.config();
    config.validate()?;
    let external = args.detector.detector == DetectorKind::External;
    if external && args.curve_file.is_none() {
        return Err(Failure::Usage("the external detector needs --curve-file".into()));
    }
    if !external && args.audio.is_none() {
        return Err(Failure::Usage(format!("the {} detector needs an audio file", config.detector)));
    }
    let audio = args.audio.as_deref().map(dataset::read_audio).transpose()?;
    let curve = match (&args.curve_file, external) {
        (Some(p), true) => Some(dataset::load_curve(p)?),
        _ => None,
    };
    let onsets = config.detect(audio.as_ref(), curve.as_ref())?;

    let mut text = String::new();
    for t in onsets.times() {
        text.push_str(&format!("{t:.6}\n"));
    }
    out.write_all(text.as_bytes())?;
    if let Some(path) = &args.export {
        fs::write(path, &text)?;
    }
    Ok(())
}

/// Builds the corpus named by `source`, warning about anything skipped.
fn load_corpus(source: &SourceArgs, detector: DetectorKind, err: &mut dyn Write) -> Result<Box<dyn Corpus>, Failure> {
    let external = detector == DetectorKind::External;
    if !(source.tolerance_ms > 0.0 && source.tolerance_ms.is_finite()) {
        return Err(Failure::Usage(format!(
            "--tolerance-ms must be positive, got {}",
            source.tolerance_ms
        )));
    }
    if let Some(root) = &source.dataset {
        if external && source.curve_dir.is_none() {
            return Err(Failure::Usage("the external detector needs --curve-dir with --dataset".into()));
        }
        let (index, orphans) = dataset::scan_index(root, &IndexPatterns::default())?;
        for path in &orphans {
            writeln!(err, "warning: no annotation for {}", path.display())?;
        }
        for path in &index.unrecognized {
            writeln!(err, "warning: skipping unrecognised file {}", path.display())?;
        }
        let mut corpus = DatasetCorpus::new(&index, source.include_discarded);
        if corpus.is_empty() {
            return Err(Failure::Data(format!("no annotated recordings under {}", root.display())));
        }
        if let Some(dir) = &source.curve_dir {
            corpus = corpus.with_curve_dir(dir.clone());
        }
        return Ok(Box::new(corpus));
    }
    let (Some(audio), Some(annotations)) = (&source.audio, &source.annotations) else {
        return Err(Failure::Usage(
            "give --dataset, or --audio together with --annotations".into(),
        ));
    };
    if external && source.curve_file.is_none() {
        return Err(Failure::Usage("the external detector needs --curve-file".into()));
    }
    let item = EvalItem {
        id: audio.display().to_string(),
        audio: Some(dataset::read_audio(audio)?),
        external_curve: source.curve_file.as_deref().map(dataset::load_curve).transpose()?,
        reference: Some(dataset::load_annotations(annotations)?.onsets),
    };
    Ok(Box::new(InMemoryCorpus::new(vec![item])))
}

fn report_exclusions(outcome: &EvalOutcome, err: &mut dyn Write) -> Outcome {
    for x in &outcome.excluded {
        writeln!(err, "warning: excluded {}: {}", x.id, x.reason)?;
    }
    if outcome.per_file.is_empty() {
        return Err(Failure::Data("no file could be evaluated".into()));
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let config = args.detector.config();
    config.validate()?;
    let corpus = load_corpus(&args.source, config.detector, err)?;
    let outcome = evaluate_detector(&config, corpus.as_ref(), args.source.tolerance_ms / 1000.0)?;
    report_exclusions(&outcome, err)?;

    let r = &outcome.aggregate;
    writeln!(out, "detector\t{}", config.detector)?;
    writeln!(out, "files\t{}", outcome.per_file.len())?;
    writeln!(out, "excluded\t{}", outcome.excluded.len())?;
    writeln!(out, "precision\t{:.3}", r.precision)?;
    writeln!(out, "recall\t{:.3}", r.recall)?;
    writeln!(out, "f1\t{:.3}", r.f1)?;
    writeln!(out, "tp\t{}", r.tp)?;
    writeln!(out, "fp\t{}", r.fp)?;
    writeln!(out, "fn\t{}", r.fn_)?;
    writeln!(out, "mad_ms\t{:.2}", r.mad_sec * 1000.0)?;
    writeln!(out, "duration_s\t{:.3}", r.wall_clock_sec)?;

    if let Some(path) = &args.export {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{}", outcome.to_json_line())?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let base = args.detector.config();
    base.validate()?;
    let spec = SweepSpec {
        num_values: args.num,
        ..SweepSpec::new(args.param, args.min, args.max)
    };
    spec.validate()?;
    let corpus = load_corpus(&args.source, base.detector, err)?;
    let tolerance = args.source.tolerance_ms / 1000.0;
    let table = sweep(&spec, &base, corpus.as_ref(), tolerance)?;

    let tsv = table.to_delimited('\t');
    out.write_all(tsv.as_bytes())?;
    if let Some(k) = best_index(&table) {
        let line = tsv.lines().nth(k + 1).unwrap_or_default();
        writeln!(out, "best\t{line}")?;
    }

    if args.param == SweepParam::RefineMs {
        let unrefined = DetectorConfig {
            refine_window_sec: 0.0,
            ..base
        };
        let baseline = evaluate_detector(&unrefined, corpus.as_ref(), tolerance)?.aggregate;
        let windows: Vec<f64> = table.rows.iter().map(|r| r.value / 1000.0).collect();
        let choice = select_refinement_window(&windows, &baseline, |w| {
            let k = windows.iter().position(|&c| c == w).expect("swept window");
            table.rows[k].report
        });
        writeln!(
            out,
            "baseline\tf1 {:.6}\tmad_ms {:.3}",
            baseline.f1,
            baseline.mad_sec * 1000.0
        )?;
        writeln!(out, "chosen_refine_ms\t{}", choice.window_sec * 1000.0)?;
    }

    if let Some(path) = &args.export {
        let mut text = String::new();
        for row in &table.rows {
            let record = serde_json::json!({
                "parameter": table.parameter,
                "value": row.value,
                "report": row.report,
            });
            text.push_str(&record.to_string());
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    Ok(())
}

fn best_index(table: &SweepTable) -> Option<usize> {
    let best = table.best()?;
    table.rows.iter().position(|r| std::ptr::eq(r, best))
}

fn cmd_stats(args: &StatsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let index = dataset::build_index(&args.root)?;
    let stats = dataset::dataset_stats(&index)?;
    if index.entries.is_empty() {
        writeln!(err, "warning: no recordings found under {}", args.root.display())?;
    } else {
        for issue in index.validate().issues {
            writeln!(err, "warning: {issue}")?;
        }
    }
    for (title, m) in [
        ("all recordings", &stats.all),
        ("excluding discarded", &stats.excluding_discarded),
    ] {
        writeln!(out, "# {title}")?;
        out.write_all(m.to_delimited('\t').as_bytes())?;
        if m.unlabeled > 0 {
            writeln!(out, "unlabelled\t{}", m.unlabeled)?;
        }
    }
    writeln!(out, "files\t{}", stats.files)?;
    writeln!(out, "participants\t{}", stats.participants)?;

    if let Some(path) = &args.export {
        fs::write(path, serde_json::to_string(&stats).expect("stats serialise"))?;
    }
    Ok(())
}
