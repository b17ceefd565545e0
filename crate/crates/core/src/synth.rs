//! Deterministic synthetic recordings with known onsets, used by tests,
//! benchmarks and the command-line self checks.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::odf::{self, OnsetCurve};
use crate::peaks::OnsetList;
use crate::stft::AudioBuffer;

/// Random gaps between events, drawn uniformly from `[min_gap_sec, max_gap_sec]`.
fn onset_times(rng: &mut StdRng, duration_sec: f64, min_gap_sec: f64, max_gap_sec: f64, lead_sec: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut t = lead_sec;
    while t < duration_sec - max_gap_sec {
        times.push(t);
        t += rng.random_range(min_gap_sec..=max_gap_sec);
    }
    times
}

/// Exponentially decaying white-noise bursts over a white-noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickTrain {
    pub duration_sec: f64,
    pub sample_rate: u32,
    pub min_gap_sec: f64,
    pub max_gap_sec: f64,
    /// Peak burst amplitude.
    pub amplitude: f64,
    /// Noise floor RMS relative to `amplitude`, in dB.
    pub noise_db: f64,
    pub burst_ms: f64,
    pub decay_ms: f64,
    pub seed: u64,
}

impl Default for ClickTrain {
    fn default() -> Self {
        Self {
            duration_sec: 60.0,
            sample_rate: 44_100,
            min_gap_sec: 0.2,
            max_gap_sec: 0.5,
            amplitude: 0.5,
            noise_db: -20.0,
            burst_ms: 30.0,
            decay_ms: 6.0,
            seed: 7,
        }
    }
}

impl ClickTrain {
    pub fn generate(&self) -> (AudioBuffer, OnsetList) {
        let mut rng = StdRng::seed_from_u64(self.seed);
        let sr = self.sample_rate as f64;
        let n = (self.duration_sec * sr).round() as usize;
        let noise_rms = self.amplitude * 10f64.powf(self.noise_db / 20.0);
        let floor = Normal::new(0.0, noise_rms).expect("finite rms");
        let mut samples: Vec<f64> = (0..n).map(|_| floor.sample(&mut rng)).collect();

        let times = onset_times(&mut rng, self.duration_sec, self.min_gap_sec, self.max_gap_sec, 0.25);
        let burst_len = (self.burst_ms * sr / 1000.0) as usize;
        let decay = self.decay_ms * sr / 1000.0;
        let mut onsets = Vec::with_capacity(times.len());
        for &t in &times {
            let start = (t * sr).round() as usize;
            for k in 0..burst_len.min(n.saturating_sub(start)) {
                let env = self.amplitude * (-(k as f64) / decay).exp();
                samples[start + k] += env * rng.random_range(-1.0..=1.0);
            }
            onsets.push(start as f64 / sr);
        }
        let audio = AudioBuffer::new(samples, self.sample_rate).expect("finite samples");
        (audio, OnsetList::unlabeled(onsets).expect("increasing"))
    }
}

/// Vocal-percussion-like events: a short noisy plosive followed by a voiced
/// vowel whose harmonic tone swells after the plosive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtteranceTrain {
    pub duration_sec: f64,
    pub sample_rate: u32,
    pub min_gap_sec: f64,
    pub max_gap_sec: f64,
    pub vowel_delay_ms: f64,
    pub vowel_ms: f64,
    pub seed: u64,
}

impl Default for UtteranceTrain {
    fn default() -> Self {
        Self {
            duration_sec: 30.0,
            sample_rate: 44_100,
            min_gap_sec: 0.12,
            max_gap_sec: 0.45,
            vowel_delay_ms: 25.0,
            vowel_ms: 90.0,
            seed: 11,
        }
    }
}

impl UtteranceTrain {
    pub fn generate(&self) -> (AudioBuffer, OnsetList) {
        let mut rng = StdRng::seed_from_u64(self.seed);
        let sr = self.sample_rate as f64;
        let n = (self.duration_sec * sr).round() as usize;
        let floor = Normal::new(0.0, 0.003).expect("finite");
        let mut samples: Vec<f64> = (0..n).map(|_| floor.sample(&mut rng)).collect();

        let times = onset_times(&mut rng, self.duration_sec, self.min_gap_sec, self.max_gap_sec, 0.2);
        let plosive_len = (0.015 * sr) as usize;
        let vowel_start = (self.vowel_delay_ms * sr / 1000.0) as usize;
        let vowel_len = (self.vowel_ms * sr / 1000.0) as usize;
        let mut onsets = Vec::with_capacity(times.len());
        for &t in &times {
            let start = (t * sr).round() as usize;
            let level = rng.random_range(0.6..1.0);
            for k in 0..plosive_len.min(n.saturating_sub(start)) {
                let env = 0.5 * level * (-(k as f64) / (0.003 * sr)).exp();
                samples[start + k] += env * rng.random_range(-1.0..=1.0);
            }
            let f0 = rng.random_range(110.0..220.0);
            let v0 = start + vowel_start;
            for k in 0..vowel_len.min(n.saturating_sub(v0)) {
                let x = k as f64 / vowel_len as f64;
                let env = 0.35 * level * (PI * x).sin().powi(2);
                let ts = k as f64 / sr;
                let tone: f64 = (1..=4)
                    .map(|h| (2.0 * PI * f0 * h as f64 * ts).sin() / h as f64)
                    .sum();
                samples[v0 + k] += env * tone;
            }
            onsets.push(start as f64 / sr);
        }
        let audio = AudioBuffer::new(samples, self.sample_rate).expect("finite samples");
        (audio, OnsetList::unlabeled(onsets).expect("increasing"))
    }
}

/// Activation curve imitating a general-purpose onset network on vocal
/// percussion: a peak at every true onset and a weaker second peak
/// `echo_delay_sec` later where the vowel starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublePeakActivation {
    pub frame_rate: f64,
    pub echo_delay_sec: f64,
    pub echo_height: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for DoublePeakActivation {
    fn default() -> Self {
        Self {
            frame_rate: 100.0,
            echo_delay_sec: 0.06,
            echo_height: 0.75,
            jitter: 0.05,
            seed: 3,
        }
    }
}

impl DoublePeakActivation {
    pub fn generate(&self, onsets: &OnsetList, duration_sec: f64) -> OnsetCurve {
        let mut rng = StdRng::seed_from_u64(self.seed);
        let frames = (duration_sec * self.frame_rate).ceil() as usize;
        let mut values = vec![0.0; frames];
        let bump = |values: &mut [f64], t: f64, height: f64| {
            let centre = (t * self.frame_rate).round() as isize;
            for (d, w) in [(-1isize, 0.4), (0, 1.0), (1, 0.4)] {
                let i = centre + d;
                if (0..values.len() as isize).contains(&i) {
                    let v = &mut values[i as usize];
                    *v = f64::max(*v, height * w);
                }
            }
        };
        for &t in onsets.times() {
            let main = 1.0 - rng.random_range(0.0..=self.jitter);
            bump(&mut values, t, main);
            let echo = self.echo_height * (1.0 - rng.random_range(0.0..=self.jitter));
            bump(&mut values, t + self.echo_delay_sec, echo);
        }
        let times = (0..frames).map(|i| i as f64 / self.frame_rate).collect();
        odf::import_external_curve(values, times).expect("valid curve")
    }
}
