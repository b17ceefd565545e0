//! Framing, windowing and short-time Fourier analysis.
//!
//! Window and hop lengths are given in milliseconds and converted to samples
//! per file by rounding to the nearest integer, so the same configuration can
//! be applied to recordings at any sample rate. The transform length equals
//! the window length (no zero padding to a power of two); bin `k` therefore
//! sits at `k * sample_rate / window_len` Hz and only bins `0..=window_len / 2`
//! are kept.
//!
//! Frame `i` covers samples `[i * hop, i * hop + window)` and is stamped with
//! its start time. The last frame is zero-padded past the end of the signal.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window of `len` samples.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Analysis window and hop, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 11 ms Hann window with 50% overlap.
    fn default() -> Self {
        Self::with_window_ms(11.0)
    }
}

impl StftConfig {
    /// Hann window of `window_ms` with the hop at half the window.
    pub fn with_window_ms(window_ms: f64) -> Self {
        Self {
            window_ms,
            hop_ms: window_ms / 2.0,
            window: WindowKind::Hann,
        }
    }

    /// Converts the millisecond lengths to samples at `sample_rate`.
    pub fn geometry(&self, sample_rate: u32) -> Result<FrameGeometry> {
        if !(self.window_ms.is_finite() && self.window_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "window_ms must be positive, got {}",
                self.window_ms
            )));
        }
        if !(self.hop_ms.is_finite() && self.hop_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hop_ms must be positive, got {}",
                self.hop_ms
            )));
        }
        if self.hop_ms > self.window_ms {
            return Err(Error::InvalidConfig(format!(
                "hop_ms ({}) exceeds window_ms ({})",
                self.hop_ms, self.window_ms
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        let to_samples = |ms: f64| (ms * sample_rate as f64 / 1000.0).round() as usize;
        let window_len = to_samples(self.window_ms);
        let hop_len = to_samples(self.hop_ms).max(1);
        if window_len < 2 {
            return Err(Error::InvalidConfig(format!(
                "{} ms at {sample_rate} Hz gives a window of {window_len} samples; need at least 2",
                self.window_ms
            )));
        }
        Ok(FrameGeometry {
            window_len,
            hop_len: hop_len.min(window_len),
            sample_rate,
        })
    }
}

/// Window and hop in samples for one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub window_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
}

impl FrameGeometry {
    pub fn frame_count(&self, signal_len: usize) -> usize {
        frame_count(signal_len, self.window_len, self.hop_len)
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        (frame * self.hop_len) as f64 / self.sample_rate as f64
    }

    pub fn hop_sec(&self) -> f64 {
        self.hop_len as f64 / self.sample_rate as f64
    }

    pub fn num_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

/// Number of frames for a signal of `signal_len` samples.
///
/// A signal no longer than one window yields a single frame. Otherwise a
/// frame starts at every multiple of `hop_len` below `signal_len`.
pub fn frame_count(signal_len: usize, window_len: usize, hop_len: usize) -> usize {
    if signal_len == 0 {
        0
    } else if signal_len <= window_len {
        1
    } else {
        signal_len.div_ceil(hop_len)
    }
}

/// Splits `audio` into windowed frames, one row per frame.
pub fn frame_signal(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Array2<f64>> {
    if audio.is_empty() {
        return Err(Error::EmptyInput("audio has no samples"));
    }
    let geom = cfg.geometry(audio.sample_rate())?;
    Ok(frame_with(audio.samples(), &geom, cfg.window))
}

fn frame_with(samples: &[f64], geom: &FrameGeometry, window: WindowKind) -> Array2<f64> {
    let n_frames = geom.frame_count(samples.len());
    let coeffs = window.coefficients(geom.window_len);
    let mut frames = Array2::<f64>::zeros((n_frames, geom.window_len));
    for (i, mut row) in frames.axis_iter_mut(Axis(0)).enumerate() {
        let start = i * geom.hop_len;
        let end = (start + geom.window_len).min(samples.len());
        for (j, (&s, &w)) in samples[start..end].iter().zip(&coeffs).enumerate() {
            row[j] = s * w;
        }
    }
    frames
}

/// Complex short-time spectrum, one row per frame and `window_len / 2 + 1`
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Array2<Complex64>,
    frame_times: Vec<f64>,
    geometry: FrameGeometry,
    config: Option<StftConfig>,
}

impl Spectrogram {
    /// Wraps precomputed bins. Frame `i` is stamped at `i * hop_len / sample_rate`.
    pub fn from_bins(bins: Array2<Complex64>, sample_rate: u32, hop_len: usize) -> Result<Self> {
        if sample_rate == 0 || hop_len == 0 {
            return Err(Error::InvalidConfig(
                "sample rate and hop must be positive".into(),
            ));
        }
        if bins.ncols() == 0 {
            return Err(Error::EmptyInput("spectrogram has no bins"));
        }
        let geometry = FrameGeometry {
            window_len: 2 * (bins.ncols() - 1).max(1),
            hop_len,
            sample_rate,
        };
        let frame_times = (0..bins.nrows()).map(|i| geometry.frame_time(i)).collect();
        Ok(Self {
            bins,
            frame_times,
            geometry,
            config: None,
        })
    }

    pub fn bins(&self) -> &Array2<Complex64> {
        &self.bins
    }

    pub fn frame(&self, n: usize) -> ArrayView1<'_, Complex64> {
        self.bins.row(n)
    }

    pub fn num_frames(&self) -> usize {
        self.bins.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.ncols()
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    /// The configuration the spectrogram was computed with, if it came from [`stft`].
    pub fn config(&self) -> Option<&StftConfig> {
        self.config.as_ref()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        magnitude(self)
    }
}

/// Short-time Fourier transform of `audio`.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    let frames = frame_signal(audio, cfg)?;
    let geometry = cfg.geometry(audio.sample_rate())?;
    let n = geometry.window_len;
    let n_bins = geometry.num_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let mut bins = Array2::<Complex64>::zeros((frames.nrows(), n_bins));
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for (frame, mut out) in frames.axis_iter(Axis(0)).zip(bins.axis_iter_mut(Axis(0))) {
        for (b, &x) in buf.iter_mut().zip(frame.iter()) {
            *b = Complex64::new(x, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, &b) in out.iter_mut().zip(&buf[..n_bins]) {
            *o = b;
        }
    }

    let frame_times = (0..bins.nrows()).map(|i| geometry.frame_time(i)).collect();
    Ok(Spectrogram {
        bins,
        frame_times,
        geometry,
        config: Some(*cfg),
    })
}

/// Element-wise modulus of the spectrogram.
pub fn magnitude(spec: &Spectrogram) -> Array2<f64> {
    spec.bins.mapv(|c| c.norm())
}
