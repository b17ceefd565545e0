//! From detection curves to onset times: thresholded local maxima, the
//! minimum-separation filter and spectral-flux refinement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::odf::OnsetCurve;

/// Default minimum separation for externally computed (neural) activations.
pub const NEURAL_MIN_SEPARATION_SEC: f64 = 0.090;

/// Utterance class tag used in the annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// kick drum
    Kd,
    /// snare drum
    Sd,
    /// closed hi-hat
    Hhc,
    /// opened hi-hat
    Hho,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Kd, Label::Sd, Label::Hhc, Label::Hho];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Kd => "kd",
            Label::Sd => "sd",
            Label::Hhc => "hhc",
            Label::Hho => "hho",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "kd" => Ok(Label::Kd),
            "sd" => Ok(Label::Sd),
            "hhc" => Ok(Label::Hhc),
            "hho" => Ok(Label::Hho),
            other => Err(other.to_string()),
        }
    }
}

/// Strictly increasing onset times in seconds, optionally labelled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OnsetList {
    times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Label>>,
}

impl OnsetList {
    pub fn new(times: Vec<f64>, labels: Option<Vec<Label>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != times.len() {
                return Err(Error::Validation(format!(
                    "{} times but {} labels",
                    times.len(),
                    l.len()
                )));
            }
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Validation(format!(
                "onset {i} has invalid time {}",
                times[i]
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "onset times not strictly increasing at index {}",
                i + 1
            )));
        }
        // an empty label vector carries nothing; keep one representation
        let labels = labels.filter(|l| !l.is_empty());
        Ok(Self { times, labels })
    }

    pub fn unlabeled(times: Vec<f64>) -> Result<Self> {
        Self::new(times, None)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Keeps the onsets whose index passes `keep`, labels included.
    fn retain_indices(&self, keep: &[usize]) -> Self {
        Self {
            times: keep.iter().map(|&i| self.times[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| keep.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Peak-picking parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    /// Minimum normalised curve value for an onset, in `[0, 1]`.
    pub threshold: f64,
    /// Onsets closer than this to the previous kept onset are dropped. 0 disables.
    pub min_separation_sec: f64,
    /// Odd neighbourhood size for the local-maximum test.
    pub local_window_frames: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            min_separation_sec: 0.0,
            local_window_frames: 3,
        }
    }
}

impl PeakConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(self.min_separation_sec >= 0.0 && self.min_separation_sec.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "minimum separation must be non-negative, got {}",
                self.min_separation_sec
            )));
        }
        if self.local_window_frames == 0 || self.local_window_frames % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "local window must be a positive odd number of frames, got {}",
                self.local_window_frames
            )));
        }
        Ok(())
    }
}

/// Frames at or above the threshold that are local maxima over
/// `±(local_window_frames - 1) / 2` frames. A frame must exceed every earlier
/// neighbour and be no smaller than every later one, so a plateau yields its
/// first frame. Zero-valued frames never count as peaks. The minimum
/// separation filter runs afterwards when enabled.
pub fn pick_peaks(curve: &OnsetCurve, cfg: &PeakConfig) -> Result<OnsetList> {
    cfg.validate()?;
    let values = curve.values();
    let half = cfg.local_window_frames / 2;
    let mut times = Vec::new();
    for (n, &v) in values.iter().enumerate() {
        if v < cfg.threshold || v <= 0.0 {
            continue;
        }
        let lo = n.saturating_sub(half);
        let hi = (n + half).min(values.len() - 1);
        let beats_left = values[lo..n].iter().all(|&u| v > u);
        let holds_right = values[n + 1..=hi].iter().all(|&u| v >= u);
        if beats_left && holds_right {
            times.push(curve.frame_times()[n]);
        }
    }
    let onsets = OnsetList {
        times,
        labels: None,
    };
    if cfg.min_separation_sec > 0.0 {
        min_separation_filter(&onsets, cfg.min_separation_sec)
    } else {
        Ok(onsets)
    }
}

/// Greedy left-to-right filter: the first onset is kept and any onset closer
/// than `min_sep_sec` to the last kept one is discarded.
pub fn min_separation_filter(onsets: &OnsetList, min_sep_sec: f64) -> Result<OnsetList> {
    if !(min_sep_sec >= 0.0) {
        return Err(Error::Validation(format!(
            "minimum separation must be non-negative, got {min_sep_sec}"
        )));
    }
    let mut keep = Vec::with_capacity(onsets.len());
    let mut last: Option<f64> = None;
    for (i, &t) in onsets.times().iter().enumerate() {
        if last.is_none_or(|l| t - l >= min_sep_sec) {
            keep.push(i);
            last = Some(t);
        }
    }
    Ok(onsets.retain_indices(&keep))
}

/// Moves each onset to the frame of maximum spectral flux within
/// `[t - window_sec / 2, t + window_sec / 2]` (earliest frame on ties).
/// Onsets with no frame inside their window stay put. The result is sorted
/// and exact duplicates collapse onto the first one.
pub fn refine_onsets(onsets: &OnsetList, sf: &OnsetCurve, window_sec: f64) -> OnsetList {
    if window_sec <= 0.0 || sf.is_empty() {
        return onsets.clone();
    }
    let times = sf.frame_times();
    let values = sf.values();
    let half = window_sec / 2.0;

    let mut moved: Vec<(f64, usize)> = onsets
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let lo = times.partition_point(|&ft| ft < t - half);
            let hi = times.partition_point(|&ft| ft <= t + half);
            let refined = crate::odf::argmax(&values[lo..hi])
                .map(|k| times[lo + k])
                .unwrap_or(t);
            (refined, i)
        })
        .collect();
    moved.sort_by(|a, b| a.0.total_cmp(&b.0));
    moved.dedup_by(|later, earlier| later.0 == earlier.0);

    OnsetList {
        times: moved.iter().map(|&(t, _)| t).collect(),
        labels: onsets
            .labels()
            .map(|l| moved.iter().map(|&(_, i)| l[i]).collect()),
    }
}

/// Outcome of choosing a refinement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementChoice {
    pub window_sec: f64,
    /// Every candidate with its refined report.
    pub candidates: Vec<(f64, EvalReport)>,
    /// F1 each candidate had to reach.
    pub f1_floor: f64,
}

/// Allowed relative F1 drop when choosing a refinement window.
pub const REFINEMENT_F1_TOLERANCE: f64 = 0.01;

/// Among the candidate windows whose refined F1 stays at or above 99% of the
/// unrefined F1, returns the one with the lowest mean absolute deviation
/// (smaller window on ties). Returns 0 when no candidate qualifies.
pub fn select_refinement_window<F>(
    candidates: &[f64],
    baseline: &EvalReport,
    mut evaluate: F,
) -> RefinementChoice
where
    F: FnMut(f64) -> EvalReport,
{
    let f1_floor = (1.0 - REFINEMENT_F1_TOLERANCE) * baseline.f1;
    let reports: Vec<(f64, EvalReport)> = candidates.iter().map(|&w| (w, evaluate(w))).collect();
    let window_sec = reports
        .iter()
        .filter(|(_, r)| r.f1 >= f1_floor)
        .min_by(|(wa, a), (wb, b)| a.mad_sec.total_cmp(&b.mad_sec).then(wa.total_cmp(wb)))
        .map(|(w, _)| *w)
        .unwrap_or(0.0);
    RefinementChoice {
        window_sec,
        candidates: reports,
        f1_floor,
    }
}
