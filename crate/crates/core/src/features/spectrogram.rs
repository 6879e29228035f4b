use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureMatrix};
use crate::corpus::{Channel, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub const SPECTROGRAM_ID: &str = "SPEC";

/// STFT settings. Magnitudes of a periodic-Hann-windowed frame, zero-padded to
/// `fft_size`, frames placed without centre padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            window_ms: 20.0,
            hop_ms: 10.0,
            fft_size: 1024,
            sample_rate: 16000,
        }
    }
}

impl SpectrogramConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `floor((n - window) / hop) + 1`, or `None` if `n` is shorter than a window.
    pub fn num_frames(&self, n: usize) -> Option<usize> {
        let win = self.window_samples();
        (n >= win).then(|| (n - win) / self.hop_samples() + 1)
    }

    fn validate(&self) -> Result<()> {
        let win = self.window_samples();
        if win == 0 || self.hop_samples() == 0 {
            return Err(Error::invalid("spectrogram window and hop must be at least one sample"));
        }
        if win > self.fft_size {
            return Err(Error::invalid(format!(
                "window of {win} samples exceeds FFT size {}",
                self.fft_size
            )));
        }
        Ok(())
    }
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn extract_spectrogram<S: Scalar>(
    w: &Waveform<S>,
    channel: Channel,
    cfg: &SpectrogramConfig,
) -> Result<FeatureMatrix<S>> {
    cfg.validate()?;
    if w.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: cfg.sample_rate,
            found: w.sample_rate(),
        });
    }
    let x = w.channel(channel)?;
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    let frames = cfg.num_frames(x.len()).ok_or_else(|| {
        Error::invalid(format!(
            "audio of {} samples is shorter than one {win}-sample window",
            x.len()
        ))
    })?;
    let bins = cfg.num_bins();
    let window: Vec<S> = periodic_hann(win).into_iter().map(S::lit).collect();
    let fft = FftPlanner::<S>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(S::zero(), S::zero()); cfg.fft_size];
    let mut scratch = vec![Complex::new(S::zero(), S::zero()); fft.get_inplace_scratch_len()];
    let mut values = Matrix::zeros(frames, bins);
    for t in 0..frames {
        let start = t * hop;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = if k < win {
                Complex::new(x[start + k] * window[k], S::zero())
            } else {
                Complex::new(S::zero(), S::zero())
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (f, out) in values.row_mut(t).iter_mut().enumerate() {
            *out = buf[f].norm();
        }
    }
    let sr = cfg.sample_rate as f64;
    FeatureMatrix::with_uniform_times(
        values,
        win as f64 / 2.0 / sr,
        hop as f64 / sr,
        FeatureKind::Spec,
        SPECTROGRAM_ID,
        channel,
    )
}
