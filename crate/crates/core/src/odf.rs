//! Onset detection functions.
//!
//! Each function maps a [`Spectrogram`] to one non-negative value per frame.
//! Three are computed here:
//!
//! * spectral flux: summed positive magnitude change per bin,
//! * high-frequency content: bin magnitudes weighted by bin index, turned into
//!   a detection curve by combining its rectified frame-to-frame increase with
//!   the energy-normalised content of the current frame,
//! * complex domain: distance between each frame and a prediction
//!   extrapolated from the two previous frames' magnitude and phase, smoothed
//!   with a triangular moving average.
//!
//! Curves produced elsewhere (for example neural network activations) enter
//! through [`import_external_curve`] or [`parse_curve_text`].

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::Spectrogram;

/// Guards the energy normalisation of the HFC curve on silent frames.
pub const HFC_ENERGY_FLOOR: f64 = 1e-12;

/// Default length of the triangular smoothing window for the complex curve.
pub const COMPLEX_SMOOTHING_FRAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SpectralFlux,
    Hfc,
    Complex,
    External,
}

/// A detection function sampled once per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetCurve {
    values: Vec<f64>,
    frame_times: Vec<f64>,
    kind: CurveKind,
}

impl OnsetCurve {
    /// Validates lengths, finiteness and strictly increasing times.
    pub fn new(values: Vec<f64>, frame_times: Vec<f64>, kind: CurveKind) -> Result<Self> {
        if values.len() != frame_times.len() {
            return Err(Error::Validation(format!(
                "{} values but {} frame times",
                values.len(),
                frame_times.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("value {i} is not finite")));
        }
        if let Some(i) = frame_times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Validation(format!("frame time {i} is not finite")));
        }
        if let Some(i) = frame_times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "frame times not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            values,
            frame_times,
            kind,
        })
    }

    fn from_spectrogram(spec: &Spectrogram, values: Vec<f64>, kind: CurveKind) -> Self {
        debug_assert_eq!(values.len(), spec.num_frames());
        Self {
            values,
            frame_times: spec.frame_times().to_vec(),
            kind,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the first maximum, `None` for an empty curve.
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.values)
    }

    pub fn normalized(&self) -> Self {
        normalize(self)
    }
}

pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if v <= b => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// `max(x, 0)`, written as `(x + |x|) / 2`.
#[inline]
pub fn half_wave_rectify(x: f64) -> f64 {
    (x + x.abs()) / 2.0
}

/// Sum over bins of the rectified magnitude increase from the previous frame.
/// The first frame is 0.
pub fn spectral_flux(spec: &Spectrogram) -> OnsetCurve {
    let mag = spec.magnitude();
    let mut values = Vec::with_capacity(mag.nrows());
    if mag.nrows() > 0 {
        values.push(0.0);
    }
    for n in 1..mag.nrows() {
        let (prev, cur) = (mag.row(n - 1), mag.row(n));
        values.push(
            cur.iter()
                .zip(prev.iter())
                .map(|(c, p)| half_wave_rectify(c - p))
                .sum(),
        );
    }
    OnsetCurve::from_spectrogram(spec, values, CurveKind::SpectralFlux)
}

/// Per-frame high-frequency content: `sum_i i * |X(n, i)|`, bins counted from 0.
pub fn hfc(spec: &Spectrogram) -> OnsetCurve {
    let values = spec
        .bins()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, c)| i as f64 * c.norm())
                .sum()
        })
        .collect();
    OnsetCurve::from_spectrogram(spec, values, CurveKind::Hfc)
}

/// HFC detection curve:
/// `D(n) = H(HFC(n) - HFC(n-1)) * HFC(n) / max(E(n), HFC_ENERGY_FLOOR)`
/// with `E(n)` the frame's summed squared magnitude. `D(0) = 0`.
pub fn hfc_detection_curve(spec: &Spectrogram) -> OnsetCurve {
    let content = hfc(spec).values;
    let energy: Vec<f64> = spec
        .bins()
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|c| c.norm_sqr()).sum())
        .collect();
    let mut values = vec![0.0; content.len()];
    for n in 1..content.len() {
        let rise = half_wave_rectify(content[n] - content[n - 1]);
        values[n] = rise * content[n] / energy[n].max(HFC_ENERGY_FLOOR);
    }
    OnsetCurve::from_spectrogram(spec, values, CurveKind::Hfc)
}

/// Wraps a phase into `(-pi, pi]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase - 2.0 * PI * ((phase + PI) / (2.0 * PI)).floor();
    // floor maps exactly -pi to -pi; fold it onto +pi
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Unsmoothed complex-domain deviation. Frame `n` is compared with the
/// prediction carrying frame `n-1`'s magnitude and the linearly extrapolated
/// phase `2 * phi(n-1) - phi(n-2)`. The first two frames are 0.
pub fn complex_deviation(spec: &Spectrogram) -> Vec<f64> {
    let bins = spec.bins();
    let mut values = vec![0.0; bins.nrows()];
    for n in 2..bins.nrows() {
        let (pp, p, cur) = (bins.row(n - 2), bins.row(n - 1), bins.row(n));
        values[n] = cur
            .iter()
            .zip(p.iter().zip(pp.iter()))
            .map(|(x, (x1, x2))| {
                let phase = wrap_phase(2.0 * x1.arg() - x2.arg());
                let predicted = Complex64::from_polar(x1.norm(), phase);
                (predicted - x).norm()
            })
            .sum();
    }
    values
}

/// Triangular weighted moving average over `window` frames (odd). Near the
/// edges the weights falling outside the curve are dropped and the rest
/// renormalised.
pub fn triangular_smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = (window / 2) as isize;
    let len = values.len() as isize;
    (0..len)
        .map(|n| {
            let (mut acc, mut total) = (0.0, 0.0);
            for d in -half..=half {
                let j = n + d;
                if (0..len).contains(&j) {
                    let w = (half + 1 - d.abs()) as f64;
                    acc += w * values[j as usize];
                    total += w;
                }
            }
            acc / total
        })
        .collect()
}

/// Complex-domain detection curve with the default 3-frame smoothing.
pub fn complex_detection_curve(spec: &Spectrogram) -> OnsetCurve {
    complex_detection_curve_smoothed(spec, COMPLEX_SMOOTHING_FRAMES)
}

/// Complex-domain detection curve smoothed over `smoothing_frames`, which is
/// rounded up to the next odd number. `1` leaves the raw deviation.
pub fn complex_detection_curve_smoothed(spec: &Spectrogram, smoothing_frames: usize) -> OnsetCurve {
    let raw = complex_deviation(spec);
    let window = smoothing_frames.max(1) | 1;
    let values = if window > 1 {
        triangular_smooth(&raw, window)
    } else {
        raw
    };
    OnsetCurve::from_spectrogram(spec, values, CurveKind::Complex)
}

/// Affine rescale onto `[0, 1]`. A constant curve becomes all zeros.
pub fn normalize(curve: &OnsetCurve) -> OnsetCurve {
    let (lo, hi) = curve
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let values = if curve.values.is_empty() || range <= 0.0 {
        vec![0.0; curve.values.len()]
    } else {
        curve.values.iter().map(|v| (v - lo) / range).collect()
    };
    OnsetCurve {
        values,
        frame_times: curve.frame_times.clone(),
        kind: curve.kind,
    }
}

/// Wraps an activation curve computed outside this crate.
pub fn import_external_curve(values: Vec<f64>, frame_times: Vec<f64>) -> Result<OnsetCurve> {
    OnsetCurve::new(values, frame_times, CurveKind::External)
}

/// Parses `time<TAB>value` lines. Blank lines and lines starting with `#`
/// are skipped.
pub fn parse_curve_text(text: &str) -> Result<OnsetCurve> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (t, v) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(format!("expected `time<TAB>value`, got `{line}`")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad time `{}`", t.trim())))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad value `{}`", v.trim())))?;
        times.push(t);
        values.push(v);
    }
    import_external_curve(values, times)
}

/// Inverse of [`parse_curve_text`]. Numbers are written in shortest
/// round-trip form, so re-parsing restores identical bits.
pub fn format_curve_text(curve: &OnsetCurve) -> String {
    let mut out = String::with_capacity(curve.len() * 24);
    for (t, v) in curve.frame_times.iter().zip(&curve.values) {
        let _ = writeln!(out, "{t}\t{v}");
    }
    out
}

/// The detection functions computed from audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionFunction {
    SpectralFlux,
    Hfc,
    Complex,
}

impl DetectionFunction {
    pub fn compute(self, spec: &Spectrogram) -> OnsetCurve {
        match self {
            DetectionFunction::SpectralFlux => spectral_flux(spec),
            DetectionFunction::Hfc => hfc_detection_curve(spec),
            DetectionFunction::Complex => complex_detection_curve(spec),
        }
    }
}
