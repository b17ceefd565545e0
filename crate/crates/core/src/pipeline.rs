//! End-to-end detector: spectrogram, detection function, normalisation, peak
//! picking and optional spectral-flux refinement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odf::{self, DetectionFunction, OnsetCurve};
use crate::peaks::{self, OnsetList, PeakConfig, NEURAL_MIN_SEPARATION_SEC};
use crate::stft::{self, AudioBuffer, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    SpectralFlux,
    Hfc,
    Complex,
    /// Activation curve supplied from outside.
    External,
}

impl DetectorKind {
    pub fn function(self) -> Option<DetectionFunction> {
        match self {
            DetectorKind::SpectralFlux => Some(DetectionFunction::SpectralFlux),
            DetectorKind::Hfc => Some(DetectionFunction::Hfc),
            DetectorKind::Complex => Some(DetectionFunction::Complex),
            DetectorKind::External => None,
        }
    }

    /// Tuned peak-picking threshold: 0.8 for HFC, 0.7 for complex.
    pub fn default_threshold(self) -> f64 {
        match self {
            DetectorKind::Hfc => 0.8,
            DetectorKind::Complex => 0.7,
            DetectorKind::SpectralFlux | DetectorKind::External => 0.5,
        }
    }

    pub fn default_min_separation_sec(self) -> f64 {
        match self {
            DetectorKind::External => NEURAL_MIN_SEPARATION_SEC,
            _ => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::SpectralFlux => "spectral_flux",
            DetectorKind::Hfc => "hfc",
            DetectorKind::Complex => "complex",
            DetectorKind::External => "external",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral_flux" | "spectral-flux" | "sf" => Ok(DetectorKind::SpectralFlux),
            "hfc" => Ok(DetectorKind::Hfc),
            "complex" => Ok(DetectorKind::Complex),
            "external" => Ok(DetectorKind::External),
            other => Err(Error::InvalidConfig(format!("unknown detector `{other}`"))),
        }
    }
}

/// Everything needed to turn one recording into onset times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub detector: DetectorKind,
    pub stft: StftConfig,
    pub peaks: PeakConfig,
    /// Spectral-flux refinement window, 0 disables.
    pub refine_window_sec: f64,
}

impl DetectorConfig {
    pub fn new(detector: DetectorKind) -> Self {
        Self {
            detector,
            stft: StftConfig::default(),
            peaks: PeakConfig {
                threshold: detector.default_threshold(),
                min_separation_sec: detector.default_min_separation_sec(),
                ..PeakConfig::default()
            },
            refine_window_sec: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.peaks.validate()?;
        // any positive rate works for the ms checks
        self.stft.geometry(48_000)?;
        if !(self.refine_window_sec >= 0.0 && self.refine_window_sec.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "refinement window must be non-negative, got {}",
                self.refine_window_sec
            )));
        }
        Ok(())
    }

    /// Computes the normalised detection curve and, when `with_flux` is set,
    /// the spectral-flux curve used for refinement.
    pub fn prepare(
        &self,
        audio: Option<&AudioBuffer>,
        external: Option<&OnsetCurve>,
        with_flux: bool,
    ) -> Result<Prepared> {
        let spec = match audio {
            Some(a) if with_flux || self.detector != DetectorKind::External => {
                Some(stft::stft(a, &self.stft)?)
            }
            _ => None,
        };
        let curve = match (self.detector.function(), &spec) {
            (Some(f), Some(s)) => f.compute(s),
            (Some(_), None) => {
                return Err(Error::Validation(format!(
                    "{} detector needs audio",
                    self.detector
                )))
            }
            (None, _) => external
                .cloned()
                .ok_or_else(|| Error::Validation("external detector needs a curve".into()))?,
        };
        let flux = match (&spec, with_flux) {
            (Some(s), true) => Some(odf::spectral_flux(s)),
            (None, true) => {
                return Err(Error::Validation(
                    "spectral-flux refinement needs audio".into(),
                ))
            }
            _ => None,
        };
        Ok(Prepared {
            curve: odf::normalize(&curve),
            flux,
        })
    }

    /// Peak picking, minimum separation and refinement on a prepared curve.
    pub fn pick(&self, prepared: &Prepared) -> Result<OnsetList> {
        let onsets = peaks::pick_peaks(&prepared.curve, &self.peaks)?;
        if self.refine_window_sec > 0.0 {
            let flux = prepared.flux.as_ref().ok_or_else(|| {
                Error::Validation("refinement requested but no spectral flux prepared".into())
            })?;
            Ok(peaks::refine_onsets(&onsets, flux, self.refine_window_sec))
        } else {
            Ok(onsets)
        }
    }

    pub fn detect(&self, audio: Option<&AudioBuffer>, external: Option<&OnsetCurve>) -> Result<OnsetList> {
        let prepared = self.prepare(audio, external, self.refine_window_sec > 0.0)?;
        self.pick(&prepared)
    }

    /// Detection on audio alone.
    pub fn detect_audio(&self, audio: &AudioBuffer) -> Result<OnsetList> {
        self.detect(Some(audio), None)
    }

    /// Everything except the picking parameters; configs with equal keys can
    /// share one [`Prepared`].
    pub(crate) fn same_front_end(&self, other: &DetectorConfig) -> bool {
        self.detector == other.detector && self.stft == other.stft
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::new(DetectorKind::Hfc)
    }
}

/// Normalised detection curve plus the optional refinement curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub curve: OnsetCurve,
    pub flux: Option<OnsetCurve>,
}
