//! Spectral oscillation detection on a window of position errors.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::fft::{fft_real, hann};
use crate::dynamics::Axis;

/// Fewest full periods of a frequency the window must hold for it to be searched.
pub const MIN_PERIODS_IN_WINDOW: f64 = 3.0;
const MIN_WINDOW: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillationConfig {
    pub window: usize,
    pub sample_dt: f64,
    pub band: (f64, f64),
    pub amp_threshold: f64,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self { window: 256, sample_dt: 0.05, band: (0.2, 2.0), amp_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationReport {
    pub axis: Axis,
    pub frequency: f64,
    pub amplitude: f64,
}

/// Spectral peak of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Hann response at a fractional bin offset, relative to the on-bin response.
fn hann_scallop(offset: f64) -> f64 {
    if offset.abs() < 1e-12 {
        return 1.0;
    }
    let x = PI * offset;
    (x.sin() / x) / (1.0 - offset * offset)
}

/// Largest in-band spectral peak of a single real signal.
///
/// The signal is detrended and Hann windowed; bin amplitudes are
/// `2|X_k| / (N * 0.5)`. The peak frequency and amplitude are refined with a
/// parabola through the log-magnitudes of the three bins around the maximum.
pub fn spectral_peak(signal: &[f64], sample_dt: f64, band: (f64, f64)) -> Option<SpectralPeak> {
    let n = signal.len();
    if n < MIN_WINDOW || !n.is_power_of_two() || !(sample_dt > 0.0) {
        return None;
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let coherent_gain = window.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = signal.iter().zip(&window).map(|(x, w)| (x - mean) * w).collect();
    let spectrum = fft_real(&windowed);
    let amp: Vec<f64> = spectrum[..n / 2].iter().map(|z| 2.0 * z.norm() / (n as f64 * coherent_gain)).collect();

    let df = 1.0 / (n as f64 * sample_dt);
    let nyquist = 0.5 / sample_dt;
    let lo = band.0.max(MIN_PERIODS_IN_WINDOW * df);
    let hi = band.1.min(nyquist);
    if !(lo <= hi) {
        return None;
    }
    let k_lo = ((lo / df).ceil() as usize).max(1);
    let k_hi = ((hi / df).floor() as usize).min(n / 2 - 2);
    if k_lo > k_hi {
        return None;
    }
    let k = (k_lo..=k_hi).max_by(|&i, &j| amp[i].total_cmp(&amp[j]))?;
    if !(amp[k] > 0.0) {
        return None;
    }

    let (a, b, c) = (amp[k - 1], amp[k], amp[k + 1]);
    let mut offset = 0.0;
    if a > 0.0 && c > 0.0 {
        let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
        let denom = la - 2.0 * lb + lc;
        if denom < 0.0 {
            offset = (0.5 * (la - lc) / denom).clamp(-0.5, 0.5);
        }
    }
    Some(SpectralPeak { frequency: (k as f64 + offset) * df, amplitude: b / hann_scallop(offset) })
}

/// Checks every axis of `buffer` and reports the strongest in-band peak
/// above `amp_threshold`.
///
/// Frequencies with fewer than [`MIN_PERIODS_IN_WINDOW`] periods in the
/// window are excluded from the search. Buffers that are not a power of two
/// long, or are shorter than 16 samples, never produce a report.
pub fn detect_oscillation(
    buffer: &[Vector3<f64>],
    sample_dt: f64,
    band: (f64, f64),
    amp_threshold: f64,
) -> Option<OscillationReport> {
    Axis::ALL
        .iter()
        .filter_map(|&axis| {
            let signal: Vec<f64> = buffer.iter().map(|v| v[axis.index()]).collect();
            spectral_peak(&signal, sample_dt, band).map(|p| OscillationReport {
                axis,
                frequency: p.frequency,
                amplitude: p.amplitude,
            })
        })
        .filter(|r| r.amplitude > amp_threshold)
        .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
}

/// Fixed-capacity sample history. The writer pushes, readers take a copy.
#[derive(Debug, Clone)]
pub struct SampleRing {
    samples: VecDeque<Vector3<f64>>,
    capacity: usize,
}

impl SampleRing {
    pub fn new(capacity: usize) -> Self {
        Self { samples: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, sample: Vector3<f64>) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn snapshot(&self) -> Vec<Vector3<f64>> {
        self.samples.iter().copied().collect()
    }
}
