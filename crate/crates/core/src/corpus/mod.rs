//! Listening-trial records, manifests, audio ingestion and dataset splits.

mod audio;
mod histogram;
mod manifest;
mod resample;
mod split;
mod synthetic;

pub use audio::{load_waveform, read_wav, write_wav_f32, Channel, Waveform};
pub use histogram::{correctness_histogram, CorrectnessHistogram, HistogramBin, ListenerMean};
pub use manifest::{
    attach_audiograms, load_listeners, load_manifest, parse_manifest, ManifestLoad,
    RejectedRecord, HLS_SUFFIX,
};
pub use resample::{resample, ResamplerParams};
pub use split::{make_split, make_split_with, validation_count, DatasetSplit, SplitMode};
pub use synthetic::{write_synthetic_corpus, SyntheticCorpus, SyntheticSpec, SYNTHETIC_RATE};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Closed,
    Open,
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::Closed => "closed",
            Track::Open => "open",
        })
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "closed" => Ok(Track::Closed),
            "open" => Ok(Track::Open),
            _ => Err(Error::invalid(format!("unknown track '{s}'"))),
        }
    }
}

/// Which processed signal is fed to a model or compared against the clean reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Hearing-aid output.
    Enhanced,
    /// Hearing-aid output after the external hearing-loss simulation.
    Hls,
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalKind::Enhanced => "enhanced",
            SignalKind::Hls => "hls",
        })
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "enhanced" => Ok(SignalKind::Enhanced),
            "hls" => Ok(SignalKind::Hls),
            _ => Err(Error::invalid(format!("unknown signal kind '{s}'"))),
        }
    }
}

/// Per-ear hearing thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audiogram {
    ear: Channel,
    frequencies_hz: Vec<f64>,
    thresholds_db_hl: Vec<f64>,
}

impl Audiogram {
    pub fn new(ear: Channel, frequencies_hz: Vec<f64>, thresholds_db_hl: Vec<f64>) -> Result<Self> {
        if frequencies_hz.len() != thresholds_db_hl.len() {
            return Err(Error::invalid(format!(
                "audiogram has {} frequencies but {} thresholds",
                frequencies_hz.len(),
                thresholds_db_hl.len()
            )));
        }
        if frequencies_hz.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::invalid("audiogram frequencies must be positive"));
        }
        if frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("audiogram frequencies must be strictly increasing"));
        }
        Ok(Self {
            ear,
            frequencies_hz,
            thresholds_db_hl,
        })
    }

    pub fn ear(&self) -> Channel {
        self.ear
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn thresholds_db_hl(&self) -> &[f64] {
        &self.thresholds_db_hl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audiograms {
    pub left: Audiogram,
    pub right: Audiogram,
}

/// A file locator relative to the audio root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AudioRef(pub String);

impl AudioRef {
    pub fn resolve(&self, audio_root: &Path) -> PathBuf {
        let p = Path::new(&self.0);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            audio_root.join(p)
        }
    }
}

impl fmt::Display for AudioRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One listening trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub listener_id: String,
    pub system_id: String,
    pub track: Track,
    pub enhanced_audio_ref: AudioRef,
    pub hls_audio_ref: Option<AudioRef>,
    pub clean_audio_ref: Option<AudioRef>,
    /// Percent of words correctly reported, 0..=100.
    pub correctness: f64,
    pub audiograms: Option<Audiograms>,
}

impl UtteranceRecord {
    pub fn audio_ref(&self, kind: SignalKind) -> Option<&AudioRef> {
        match kind {
            SignalKind::Enhanced => Some(&self.enhanced_audio_ref),
            SignalKind::Hls => self.hls_audio_ref.as_ref(),
        }
    }
}

/// Anything that can produce a waveform for a locator.
pub trait WaveformSource<S: Scalar>: Sync {
    fn load(&self, audio: &AudioRef) -> Result<Waveform<S>>;
}

impl<S: Scalar, F> WaveformSource<S> for F
where
    F: Fn(&AudioRef) -> Result<Waveform<S>> + Sync,
{
    fn load(&self, audio: &AudioRef) -> Result<Waveform<S>> {
        self(audio)
    }
}

/// WAV files under a root directory, resampled on load.
#[derive(Debug, Clone)]
pub struct AudioDir {
    pub root: PathBuf,
    pub target_rate: u32,
}

impl AudioDir {
    pub fn new(root: impl Into<PathBuf>, target_rate: u32) -> Self {
        Self {
            root: root.into(),
            target_rate,
        }
    }
}

impl<S: Scalar> WaveformSource<S> for AudioDir {
    fn load(&self, audio: &AudioRef) -> Result<Waveform<S>> {
        load_waveform(&audio.resolve(&self.root), self.target_rate)
    }
}

/// Map percent correctness to the unit interval.
pub fn normalize_correctness(percent: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(Error::invalid(format!("correctness {percent} outside [0, 100]")));
    }
    Ok(percent / 100.0)
}
