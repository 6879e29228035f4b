use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::resample::{resample, ResamplerParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ear / audio channel. Left is always channel index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::Left => 0,
            Channel::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Left => "left",
            Channel::Right => "right",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Channel::Left),
            "right" | "r" => Ok(Channel::Right),
            _ => Err(Error::invalid(format!("unknown channel '{s}'"))),
        }
    }
}

/// Mono or binaural audio. Channel 0 is left.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<S> {
    channels: Vec<Vec<S>>,
    sample_rate: u32,
}

impl<S: Scalar> Waveform<S> {
    pub fn new(channels: Vec<Vec<S>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(Error::invalid(format!(
                "waveform must have 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::invalid("waveform is empty"));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("channels differ in length"));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<S>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn stereo(left: Vec<S>, right: Vec<S>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![left, right], sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_labels(&self) -> Vec<Channel> {
        [Channel::Left, Channel::Right][..self.channels.len()].to_vec()
    }

    pub fn channel(&self, ch: Channel) -> Result<&[S]> {
        self.channels
            .get(ch.index())
            .map(Vec::as_slice)
            .ok_or(Error::MissingChannel(ch.as_str()))
    }

    pub fn channels(&self) -> &[Vec<S>] {
        &self.channels
    }

    /// Channels swapped (stereo only; mono is returned unchanged).
    pub fn swapped(&self) -> Self {
        let mut channels = self.channels.clone();
        channels.reverse();
        Self {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, c: S) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .map(|ch| ch.iter().map(|&v| v * c).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Band-limited resampling of every channel; identity when the rate already matches.
    pub fn resampled(&self, target_rate: u32, params: &ResamplerParams) -> Result<Self> {
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let channels = self
            .channels
            .iter()
            .map(|c| resample(c, self.sample_rate, target_rate, params))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels, target_rate)
    }
}

/// Decode a RIFF/WAV file into floating-point samples in [-1, 1] at the file's own rate.
pub fn read_wav<S: Scalar>(path: &Path) -> Result<Waveform<S>> {
    let locator = path.display().to_string();
    let audio_err = |reason: String| Error::Audio {
        locator: locator.clone(),
        reason,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| audio_err(e.to_string()))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 || n_ch > 2 {
        return Err(audio_err(format!("unsupported channel count {n_ch}")));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| audio_err(e.to_string()))?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| audio_err(e.to_string()))?
        }
    };
    if interleaved.is_empty() {
        return Err(audio_err("zero-length audio".into()));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(S::lit(v));
        }
    }
    Waveform::new(channels, spec.sample_rate).map_err(|e| audio_err(e.to_string()))
}

/// Load a WAV file and bring it to `target_rate`, keeping channel order.
pub fn load_waveform<S: Scalar>(path: &Path, target_rate: u32) -> Result<Waveform<S>> {
    let w = read_wav::<S>(path)?;
    w.resampled(target_rate, &ResamplerParams::default())
        .map_err(|e| Error::Audio {
            locator: path.display().to_string(),
            reason: e.to_string(),
        })
}

/// Write 32-bit float WAV. Used by tests and fixture generation.
pub fn write_wav_f32<S: Scalar>(path: &Path, w: &Waveform<S>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: w.num_channels() as u16,
        sample_rate: w.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let err = |e: hound::Error| Error::Audio {
        locator: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(err)?;
    for n in 0..w.len() {
        for ch in w.channels() {
            writer
                .write_sample(ch[n].to_f32().unwrap_or(0.0))
                .map_err(err)?;
        }
    }
    writer.finalize().map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn waveform_invariants() {
        assert!(Waveform::<f32>::new(vec![], 16000).is_err());
        assert!(Waveform::<f32>::mono(vec![], 16000).is_err());
        assert!(Waveform::<f32>::mono(vec![0.0], 0).is_err());
        assert!(Waveform::<f32>::stereo(vec![0.0], vec![0.0, 1.0], 16000).is_err());
        let w = Waveform::<f32>::new(vec![vec![0.0]; 3], 16000);
        assert!(w.is_err());
        let m = Waveform::<f32>::mono(vec![0.5], 16000).unwrap();
        assert_eq!(m.channel_labels(), vec![Channel::Left]);
        assert!(matches!(m.channel(Channel::Right), Err(Error::MissingChannel("right"))));
    }

    #[test]
    fn identical_rate_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let l: Vec<f64> = tone(440.0, 16000, 1600, 0.3);
        let r: Vec<f64> = tone(880.0, 16000, 1600, 0.2);
        let w = Waveform::stereo(l, r, 16000).unwrap();
        write_wav_f32(&p, &w).unwrap();
        let raw = read_wav::<f64>(&p).unwrap();
        let loaded = load_waveform::<f64>(&p, 16000).unwrap();
        assert_eq!(raw, loaded);
        assert_eq!(loaded.channel_labels(), vec![Channel::Left, Channel::Right]);
    }

    #[test]
    fn stereo_44k_to_16k_keeps_order_and_scales_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        let n = 44100;
        // Left loud 1 kHz, right quiet 2 kHz, so a swap would be visible.
        let w = Waveform::stereo(tone(1000.0, 44100, n, 0.5), tone(2000.0, 44100, n, 0.05), 44100)
            .unwrap();
        write_wav_f32(&p, &w).unwrap();
        let out = load_waveform::<f64>(&p, 16000).unwrap();
        assert_eq!(out.sample_rate(), 16000);
        assert_eq!(out.num_channels(), 2);
        let expected = n as f64 * 16000.0 / 44100.0;
        assert!((out.len() as f64 - expected).abs() <= 1.0);
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let l = rms(out.channel(Channel::Left).unwrap());
        let r = rms(out.channel(Channel::Right).unwrap());
        assert!(l > 5.0 * r);
    }

    #[test]
    fn int_pcm_mono_is_normalised() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut wr = hound::WavWriter::create(&p, spec).unwrap();
        for v in [0i16, 16384, -32768] {
            wr.write_sample(v).unwrap();
        }
        wr.finalize().unwrap();
        let w = load_waveform::<f32>(&p, 16000).unwrap();
        assert_eq!(w.channel_labels(), vec![Channel::Left]);
        assert_eq!(w.channel(Channel::Left).unwrap(), &[0.0, 0.5, -1.0]);
    }

    #[test]
    fn undecodable_and_empty_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.wav");
        std::fs::write(&bad, b"not a wav").unwrap();
        match load_waveform::<f32>(&bad, 16000) {
            Err(Error::Audio { locator, .. }) => assert!(locator.ends_with("bad.wav")),
            other => panic!("expected audio error, got {other:?}"),
        }

        let empty = dir.path().join("empty.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        hound::WavWriter::create(&empty, spec).unwrap().finalize().unwrap();
        let err = load_waveform::<f32>(&empty, 16000).unwrap_err();
        assert!(err.to_string().contains("zero-length"));
    }
}
