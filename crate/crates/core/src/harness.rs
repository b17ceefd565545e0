//! Corpus-level evaluation: pooled scores over many files, parameter sweeps,
//! grid search and the minimum-separation and refinement studies.
//!
//! Files are processed in parallel but results are always folded in corpus
//! order (sorted ids), so reports do not depend on scheduling. Counts are
//! micro-averaged: true/false positives and misses are summed over files
//! before precision, recall and F1 are computed. Reported durations cover
//! detection and post-processing only; loading and decoding are excluded.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{match_onsets, Counts, EvalReport};
use crate::odf::OnsetCurve;
use crate::peaks::{select_refinement_window, OnsetList, RefinementChoice};
use crate::pipeline::{DetectorConfig, Prepared};
use crate::stft::AudioBuffer;

/// One evaluable recording.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub audio: Option<AudioBuffer>,
    pub external_curve: Option<OnsetCurve>,
    pub reference: Option<OnsetList>,
}

/// A set of recordings with ground truth.
pub trait Corpus: Sync {
    /// Item ids in evaluation order.
    fn ids(&self) -> Vec<String>;

    fn load(&self, id: &str) -> Result<EvalItem>;
}

/// Corpus held entirely in memory, ordered by id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryCorpus {
    items: Vec<EvalItem>,
}

impl InMemoryCorpus {
    pub fn new(mut items: Vec<EvalItem>) -> Self {
        items.sort_by(|a, b| a.id.cmp(&b.id));
        Self { items }
    }

    pub fn items(&self) -> &[EvalItem] {
        &self.items
    }
}

impl Corpus for InMemoryCorpus {
    fn ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    fn load(&self, id: &str) -> Result<EvalItem> {
        self.items
            .iter()
            .find(|i| i.id == id)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("no item `{id}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub id: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

/// Result of running one detector configuration over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub config: DetectorConfig,
    pub tolerance_sec: f64,
    pub aggregate: EvalReport,
    pub per_file: Vec<FileReport>,
    pub excluded: Vec<Exclusion>,
}

impl EvalOutcome {
    /// Single-line JSON record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcome serialises")
    }
}

/// Runs `config` over every file and pools the counts.
pub fn evaluate_detector(config: &DetectorConfig, corpus: &dyn Corpus, tolerance_sec: f64) -> Result<EvalOutcome> {
    let mut out = evaluate_many(std::slice::from_ref(config), corpus, tolerance_sec)?;
    Ok(out.remove(0))
}

enum FileResult {
    Scored(Vec<(Counts, f64)>),
    Excluded(String),
}

/// Evaluates several configurations in one pass over the corpus. Each file
/// is loaded once, and configurations sharing a detector and STFT setup
/// share the detection curve.
pub fn evaluate_many(configs: &[DetectorConfig], corpus: &dyn Corpus, tolerance_sec: f64) -> Result<Vec<EvalOutcome>> {
    if !(tolerance_sec > 0.0 && tolerance_sec.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tolerance_sec}"
        )));
    }
    for c in configs {
        c.validate()?;
    }

    // group configs by front end
    let mut groups: Vec<(DetectorConfig, bool, Vec<usize>)> = Vec::new();
    for (k, c) in configs.iter().enumerate() {
        match groups.iter_mut().find(|(lead, _, _)| lead.same_front_end(c)) {
            Some((_, flux, members)) => {
                *flux |= c.refine_window_sec > 0.0;
                members.push(k);
            }
            None => groups.push((*c, c.refine_window_sec > 0.0, vec![k])),
        }
    }

    let ids = corpus.ids();
    let results: Vec<(String, FileResult)> = ids
        .par_iter()
        .map(|id| {
            let outcome = run_file(id, configs, &groups, corpus, tolerance_sec);
            (id.clone(), outcome)
        })
        .collect();

    let mut outcomes: Vec<EvalOutcome> = configs
        .iter()
        .map(|c| EvalOutcome {
            config: *c,
            tolerance_sec,
            aggregate: EvalReport::default(),
            per_file: Vec::new(),
            excluded: Vec::new(),
        })
        .collect();
    let mut totals = vec![(Counts::default(), 0.0f64); configs.len()];
    for (id, result) in results {
        match result {
            FileResult::Scored(per_config) => {
                for (k, (counts, secs)) in per_config.into_iter().enumerate() {
                    totals[k].0 = totals[k].0 + counts;
                    totals[k].1 += secs;
                    outcomes[k].per_file.push(FileReport {
                        id: id.clone(),
                        report: EvalReport::from_counts(counts, secs),
                    });
                }
            }
            FileResult::Excluded(reason) => {
                log::warn!("excluding {id}: {reason}");
                for o in &mut outcomes {
                    o.excluded.push(Exclusion {
                        id: id.clone(),
                        reason: reason.clone(),
                    });
                }
            }
        }
    }
    for (o, (counts, secs)) in outcomes.iter_mut().zip(totals) {
        o.aggregate = EvalReport::from_counts(counts, secs);
    }
    Ok(outcomes)
}

fn run_file(
    id: &str,
    configs: &[DetectorConfig],
    groups: &[(DetectorConfig, bool, Vec<usize>)],
    corpus: &dyn Corpus,
    tolerance_sec: f64,
) -> FileResult {
    let item = match corpus.load(id) {
        Ok(item) => item,
        Err(e) => return FileResult::Excluded(e.to_string()),
    };
    let Some(reference) = &item.reference else {
        return FileResult::Excluded("no annotation".into());
    };
    let mut per_config = vec![(Counts::default(), 0.0); configs.len()];
    for (lead, with_flux, members) in groups {
        let start = Instant::now();
        let prepared: Prepared =
            match lead.prepare(item.audio.as_ref(), item.external_curve.as_ref(), *with_flux) {
                Ok(p) => p,
                Err(e) => return FileResult::Excluded(e.to_string()),
            };
        let prepare_secs = start.elapsed().as_secs_f64();
        for &k in members {
            let start = Instant::now();
            let predicted = match configs[k].pick(&prepared) {
                Ok(p) => p,
                Err(e) => return FileResult::Excluded(e.to_string()),
            };
            let secs = prepare_secs + start.elapsed().as_secs_f64();
            let counts = match_onsets(reference, &predicted, tolerance_sec).counts();
            per_config[k] = (counts, secs);
        }
    }
    FileResult::Scored(per_config)
}

/// Parameter varied by a sweep. Time parameters are in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Threshold,
    /// Window length; the hop follows at half the window.
    FrameMs,
    HopMs,
    MinSepMs,
    RefineMs,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Threshold => "threshold",
            SweepParam::FrameMs => "frame-ms",
            SweepParam::HopMs => "hop-ms",
            SweepParam::MinSepMs => "min-sep-ms",
            SweepParam::RefineMs => "refine-ms",
        }
    }

    pub fn apply(self, value: f64, cfg: &mut DetectorConfig) {
        match self {
            SweepParam::Threshold => cfg.peaks.threshold = value,
            SweepParam::FrameMs => {
                cfg.stft.window_ms = value;
                cfg.stft.hop_ms = value / 2.0;
            }
            SweepParam::HopMs => cfg.stft.hop_ms = value,
            SweepParam::MinSepMs => cfg.peaks.min_separation_sec = value / 1000.0,
            SweepParam::RefineMs => cfg.refine_window_sec = value / 1000.0,
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(SweepParam::Threshold),
            "frame-ms" => Ok(SweepParam::FrameMs),
            "hop-ms" => Ok(SweepParam::HopMs),
            "min-sep-ms" => Ok(SweepParam::MinSepMs),
            "refine-ms" => Ok(SweepParam::RefineMs),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// Linearly spaced values of one parameter; every other parameter stays at
/// the base configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub min: f64,
    pub max: f64,
    pub num_values: usize,
}

impl SweepSpec {
    pub const DEFAULT_NUM_VALUES: usize = 10;

    pub fn new(parameter: SweepParam, min: f64, max: f64) -> Self {
        Self {
            parameter,
            min,
            max,
            num_values: Self::DEFAULT_NUM_VALUES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_values < 2 {
            return Err(Error::InvalidConfig(format!(
                "a sweep needs at least 2 values, got {}",
                self.num_values
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidConfig(format!(
                "sweep range must satisfy min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.num_values)
    }
}

/// `n` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![min],
        _ => {
            let step = (max - min) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { max } else { min + step * i as f64 })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    /// Value with the highest F1, the smallest one on ties.
    pub best_value: f64,
}

impl SweepTable {
    fn from_rows(parameter: &str, rows: Vec<SweepRow>) -> Self {
        let best_value = best_row(&rows).map(|r| r.value).unwrap_or(f64::NAN);
        Self {
            parameter: parameter.to_string(),
            rows,
            best_value,
        }
    }

    pub fn best(&self) -> Option<&SweepRow> {
        best_row(&self.rows)
    }

    /// Header plus one row per value, fields separated by `sep`.
    pub fn to_delimited(&self, sep: char) -> String {
        let mut out = String::new();
        let header = [
            self.parameter.as_str(),
            "precision",
            "recall",
            "f1",
            "mad_ms",
            "tp",
            "fp",
            "fn",
            "duration_s",
        ];
        out.push_str(&header.join(&sep.to_string()));
        out.push('\n');
        for row in &self.rows {
            let r = &row.report;
            let _ = writeln!(
                out,
                "{v}{s}{p:.6}{s}{rc:.6}{s}{f:.6}{s}{m:.3}{s}{tp}{s}{fp}{s}{fn_}{s}{d:.3}",
                v = row.value,
                s = sep,
                p = r.precision,
                rc = r.recall,
                f = r.f1,
                m = r.mad_sec * 1000.0,
                tp = r.tp,
                fp = r.fp,
                fn_ = r.fn_,
                d = r.wall_clock_sec,
            );
        }
        out
    }
}

fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().fold(None, |best: Option<&SweepRow>, row| match best {
        Some(b) if row.report.f1 < b.report.f1 => best,
        Some(b) if row.report.f1 == b.report.f1 && row.value >= b.value => best,
        _ => Some(row),
    })
}

/// Evaluates each value of `spec` with everything else held at `base`.
pub fn sweep(spec: &SweepSpec, base: &DetectorConfig, corpus: &dyn Corpus, tolerance_sec: f64) -> Result<SweepTable> {
    spec.validate()?;
    let values = spec.values();
    let configs: Vec<DetectorConfig> = values
        .iter()
        .map(|&v| {
            let mut c = *base;
            spec.parameter.apply(v, &mut c);
            c
        })
        .collect();
    let outcomes = evaluate_many(&configs, corpus, tolerance_sec)?;
    let rows = values
        .into_iter()
        .zip(outcomes)
        .map(|(value, o)| SweepRow {
            value,
            report: o.aggregate,
        })
        .collect();
    Ok(SweepTable::from_rows(spec.parameter.name(), rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub values: Vec<f64>,
    pub report: EvalReport,
}

/// Cartesian product of several sweeps. Returns every point and the index
/// of the best one (highest F1, first in enumeration order on ties).
pub fn grid_search(
    specs: &[SweepSpec],
    base: &DetectorConfig,
    corpus: &dyn Corpus,
    tolerance_sec: f64,
) -> Result<(Vec<GridPoint>, usize)> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("grid search needs at least one parameter".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let axes: Vec<Vec<f64>> = specs.iter().map(|s| s.values()).collect();
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let configs: Vec<DetectorConfig> = points
        .iter()
        .map(|p| {
            let mut c = *base;
            for (spec, &v) in specs.iter().zip(p) {
                spec.parameter.apply(v, &mut c);
            }
            c
        })
        .collect();
    let outcomes = evaluate_many(&configs, corpus, tolerance_sec)?;
    let grid: Vec<GridPoint> = points
        .into_iter()
        .zip(outcomes)
        .map(|(values, o)| GridPoint {
            values,
            report: o.aggregate,
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .fold(0, |b, (i, g)| if g.report.f1 > grid[b].report.f1 { i } else { b });
    Ok((grid, best))
}

/// F1 (and full reports) for each minimum separation, in seconds.
pub fn min_separation_study(
    separations_sec: &[f64],
    base: &DetectorConfig,
    corpus: &dyn Corpus,
    tolerance_sec: f64,
) -> Result<SweepTable> {
    if separations_sec.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("separations must be sorted".into()));
    }
    let configs: Vec<DetectorConfig> = separations_sec
        .iter()
        .map(|&s| {
            let mut c = *base;
            c.peaks.min_separation_sec = s;
            c
        })
        .collect();
    let outcomes = evaluate_many(&configs, corpus, tolerance_sec)?;
    let rows = separations_sec
        .iter()
        .zip(outcomes)
        .map(|(&s, o)| SweepRow {
            value: s * 1000.0,
            report: o.aggregate,
        })
        .collect();
    Ok(SweepTable::from_rows(SweepParam::MinSepMs.name(), rows))
}

/// Unrefined baseline plus the refinement window chosen by the 1% F1 rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub baseline: EvalReport,
    pub choice: RefinementChoice,
    /// Report at the chosen window (the baseline when refinement is off).
    pub refined: EvalReport,
}

/// Evaluates `base` without refinement and with each candidate window, then
/// picks the window per [`select_refinement_window`].
pub fn refinement_study(
    candidates_sec: &[f64],
    base: &DetectorConfig,
    corpus: &dyn Corpus,
    tolerance_sec: f64,
) -> Result<RefinementStudy> {
    if candidates_sec.is_empty() {
        return Err(Error::InvalidConfig("no refinement windows to try".into()));
    }
    let mut configs = vec![DetectorConfig {
        refine_window_sec: 0.0,
        ..*base
    }];
    configs.extend(candidates_sec.iter().map(|&w| DetectorConfig {
        refine_window_sec: w,
        ..*base
    }));
    let outcomes = evaluate_many(&configs, corpus, tolerance_sec)?;
    let baseline = outcomes[0].aggregate;
    let choice = select_refinement_window(candidates_sec, &baseline, |w| {
        let k = candidates_sec.iter().position(|&c| c == w).expect("candidate") + 1;
        outcomes[k].aggregate
    });
    let refined = candidates_sec
        .iter()
        .position(|&c| c == choice.window_sec)
        .map(|k| outcomes[k + 1].aggregate)
        .unwrap_or(baseline);
    Ok(RefinementStudy {
        baseline,
        choice,
        refined,
    })
}
