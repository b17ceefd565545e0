//! Onset detection for vocal percussion.
//!
//! The crate covers the whole chain from a WAV file to scored onsets:
//!
//! * [`stft`]: framing, windowing and the short-time Fourier transform,
//! * [`odf`]: spectral flux, high-frequency content and complex-domain
//!   detection functions, plus import of external activation curves,
//! * [`peaks`]: peak picking, the minimum-separation filter and
//!   spectral-flux refinement,
//! * [`eval`] and [`harness`]: tolerance matching, F1 and deviation scores,
//!   corpus evaluation, sweeps and studies,
//! * [`dataset`]: annotation and WAV I/O and the corpus index.
//!
//! ```
//! use avp_core::{DetectorConfig, DetectorKind};
//! use avp_core::synth::ClickTrain;
//!
//! let (audio, truth) = ClickTrain { duration_sec: 3.0, ..ClickTrain::default() }.generate();
//! let onsets = DetectorConfig::new(DetectorKind::Complex).detect_audio(&audio).unwrap();
//! let report = avp_core::score(&avp_core::match_onsets(&truth, &onsets, 0.05));
//! assert_eq!(report.f1, 1.0);
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
pub mod harness;
pub mod odf;
pub mod peaks;
pub mod pipeline;
pub mod stft;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{match_onsets, score, Counts, EvalReport, MatchResult, DEFAULT_TOLERANCE_SEC};
pub use harness::{
    evaluate_detector, sweep, Corpus, EvalItem, EvalOutcome, InMemoryCorpus, SweepParam,
    SweepSpec, SweepTable,
};
pub use odf::{CurveKind, DetectionFunction, OnsetCurve};
pub use peaks::{Label, OnsetList, PeakConfig};
pub use pipeline::{DetectorConfig, DetectorKind};
pub use stft::{AudioBuffer, Spectrogram, StftConfig, WindowKind};
