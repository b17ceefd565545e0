//! Matching predicted onsets to reference onsets and scoring the result.
//!
//! A prediction counts as a hit when it is paired one-to-one with a reference
//! no further than the tolerance away. Pairs are first taken greedily in order
//! of increasing distance (ties: earlier reference, then earlier prediction).
//! Greedy nearest-first pairing can leave a reference unmatched when a
//! different assignment would match both, e.g. references `[0.00, 0.06]`,
//! predictions `[-0.04, 0.03]` at 50 ms. The greedy matching is therefore
//! grown with augmenting paths until it has maximum cardinality; nearest-first
//! pairs are only rearranged where that increases the hit count.

use serde::{Deserialize, Serialize};

use crate::peaks::OnsetList;

/// Default matching tolerance.
pub const DEFAULT_TOLERANCE_SEC: f64 = 0.050;

/// One-to-one pairing between reference and predicted onsets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(reference_time, predicted_time)`, ordered by reference time.
    pub pairs: Vec<(f64, f64)>,
    pub unmatched_refs: usize,
    pub unmatched_preds: usize,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.pairs.len(),
            fp: self.unmatched_preds,
            fn_: self.unmatched_refs,
            abs_dev_sum: self.pairs.iter().map(|(r, p)| (r - p).abs()).sum(),
        }
    }
}

/// Maximum-cardinality matching within `tolerance_sec`, seeded with
/// nearest-first greedy pairs.
pub fn match_onsets(reference: &OnsetList, predicted: &OnsetList, tolerance_sec: f64) -> MatchResult {
    match_times(reference.times(), predicted.times(), tolerance_sec)
}

/// [`match_onsets`] on bare sorted time slices.
pub fn match_times(refs: &[f64], preds: &[f64], tolerance_sec: f64) -> MatchResult {
    // candidate edges, found with a sliding window over the sorted predictions
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); refs.len()];
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    let mut start = 0;
    for (i, &r) in refs.iter().enumerate() {
        while start < preds.len() && r - preds[start] > tolerance_sec {
            start += 1;
        }
        for (j, &p) in preds.iter().enumerate().skip(start) {
            let d = (p - r).abs();
            if p - r > tolerance_sec {
                break;
            }
            if d <= tolerance_sec {
                edges.push((d, i, j));
                adjacency[i].push(j);
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut ref_to_pred: Vec<Option<usize>> = vec![None; refs.len()];
    let mut pred_to_ref: Vec<Option<usize>> = vec![None; preds.len()];
    for &(_, i, j) in &edges {
        if ref_to_pred[i].is_none() && pred_to_ref[j].is_none() {
            ref_to_pred[i] = Some(j);
            pred_to_ref[j] = Some(i);
        }
    }

    // nearest predictions first when searching for augmenting paths
    for (i, adj) in adjacency.iter_mut().enumerate() {
        adj.sort_by(|&a, &b| {
            (preds[a] - refs[i])
                .abs()
                .total_cmp(&(preds[b] - refs[i]).abs())
                .then(a.cmp(&b))
        });
    }
    let mut visited = vec![false; preds.len()];
    for i in 0..refs.len() {
        if ref_to_pred[i].is_none() && !adjacency[i].is_empty() {
            visited.iter_mut().for_each(|v| *v = false);
            augment(i, &adjacency, &mut ref_to_pred, &mut pred_to_ref, &mut visited);
        }
    }

    let pairs: Vec<(f64, f64)> = ref_to_pred
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (refs[i], preds[j])))
        .collect();
    MatchResult {
        unmatched_refs: refs.len() - pairs.len(),
        unmatched_preds: preds.len() - pairs.len(),
        pairs,
    }
}

fn augment(
    i: usize,
    adjacency: &[Vec<usize>],
    ref_to_pred: &mut [Option<usize>],
    pred_to_ref: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &j in &adjacency[i] {
        if visited[j] {
            continue;
        }
        visited[j] = true;
        let free = match pred_to_ref[j] {
            None => true,
            Some(other) => augment(other, adjacency, ref_to_pred, pred_to_ref, visited),
        };
        if free {
            ref_to_pred[i] = Some(j);
            pred_to_ref[j] = Some(i);
            return true;
        }
    }
    false
}

/// Hit/miss tallies that add up across files.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Sum of `|reference - prediction|` over matched pairs, seconds.
    pub abs_dev_sum: f64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            abs_dev_sum: self.abs_dev_sum + o.abs_dev_sum,
        }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

/// Precision, recall, F1 and timing accuracy of a detection run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean absolute deviation over matched pairs, seconds.
    pub mad_sec: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub wall_clock_sec: f64,
}

impl EvalReport {
    pub fn from_counts(c: Counts, wall_clock_sec: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            mad_sec: if c.tp == 0 { 0.0 } else { c.abs_dev_sum / c.tp as f64 },
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            wall_clock_sec,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            abs_dev_sum: self.mad_sec * self.tp as f64,
        }
    }
}

/// Scores one match.
pub fn score(m: &MatchResult) -> EvalReport {
    EvalReport::from_counts(m.counts(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ol(t: &[f64]) -> OnsetList {
        OnsetList::unlabeled(t.to_vec()).unwrap()
    }

    #[test]
    fn identical_lists_match_fully() {
        let l = ol(&[0.1, 0.5, 0.9]);
        let m = match_onsets(&l, &l, 0.05);
        assert_eq!((m.tp(), m.unmatched_preds, m.unmatched_refs), (3, 0, 0));
    }

    #[test]
    fn spurious_prediction_counts_as_false_positive() {
        let m = match_onsets(&ol(&[0.0, 1.0]), &ol(&[0.03, 0.40, 1.02]), 0.05);
        assert_eq!((m.tp(), m.unmatched_preds, m.unmatched_refs), (2, 1, 0));
        assert_eq!(m.pairs, vec![(0.0, 0.03), (1.0, 1.02)]);
    }

    #[test]
    fn empty_predictions() {
        let m = match_onsets(&ol(&[0.2, 0.4]), &OnsetList::empty(), 0.05);
        assert_eq!((m.tp(), m.unmatched_refs), (0, 2));
    }

    #[test]
    fn greedy_conflict_is_resolved_by_augmentation() {
        // nearest-first alone would pair 0.00 with 0.03 and strand 0.06
        let m = match_times(&[0.00, 0.06], &[-0.04, 0.03], 0.05);
        assert_eq!(m.tp(), 2);
        assert_eq!(m.pairs, vec![(0.00, -0.04), (0.06, 0.03)]);
    }

    #[test]
    fn nearest_pair_wins_when_cardinality_is_unaffected() {
        let m = match_times(&[1.0], &[0.97, 0.99], 0.05);
        assert_eq!(m.pairs, vec![(1.0, 0.99)]);
        // equal distance: earlier prediction
        let m = match_times(&[1.0], &[0.98, 1.02], 0.05);
        assert_eq!(m.pairs, vec![(1.0, 0.98)]);
    }

    #[test]
    fn scoring_arithmetic() {
        let r = EvalReport::from_counts(
            Counts {
                tp: 2,
                fp: 1,
                fn_: 0,
                abs_dev_sum: 0.0,
            },
            0.0,
        );
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 0.8).abs() < 1e-15);

        let empty = score(&MatchResult::default());
        assert_eq!((empty.precision, empty.recall, empty.f1, empty.mad_sec), (0.0, 0.0, 0.0, 0.0));

        let r = score(&match_times(&[1.0, 2.0], &[1.006, 2.012], 0.05));
        assert!((r.mad_sec - 0.009).abs() < 1e-12);
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn pooled_counts() {
        let a = Counts { tp: 3, fp: 1, fn_: 0, abs_dev_sum: 0.0 };
        let b = Counts { tp: 1, fp: 0, fn_: 2, abs_dev_sum: 0.0 };
        let r = EvalReport::from_counts([a, b].into_iter().sum(), 0.0);
        assert!((r.precision - 0.8).abs() < 1e-15);
        assert!((r.recall - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.f1 - 0.727_272_727_272_727_3).abs() < 1e-12);
    }
}
