use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::spectrogram::{extract_spectrogram, SpectrogramConfig};
use super::{FeatureKind, FeatureMatrix};
use crate::corpus::{Channel, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Static facts about a speech-representation model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub fe_dim: usize,
    pub ol_dim: usize,
    /// Input samples per output frame.
    pub frame_hop: usize,
    /// Input samples seen by the first output frame.
    pub receptive_field: usize,
    pub expected_sample_rate: u32,
    /// Which hidden state is read out as the output-layer representation.
    pub ol_tap: String,
}

impl BackendDescriptor {
    pub fn dim(&self, kind: FeatureKind) -> Result<usize> {
        match kind {
            FeatureKind::Fe => Ok(self.fe_dim),
            FeatureKind::Ol => Ok(self.ol_dim),
            FeatureKind::Spec => Err(Error::invalid(format!(
                "backend {} has no spectrogram stage",
                self.backend_id
            ))),
        }
    }

    /// Frames produced for `n` input samples: `floor((n - rf) / hop) + 1`.
    pub fn num_frames(&self, n: usize) -> usize {
        if n < self.receptive_field {
            0
        } else {
            (n - self.receptive_field) / self.frame_hop + 1
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fe_dim == 0 || self.ol_dim == 0 || self.frame_hop == 0 {
            return Err(Error::invalid(format!(
                "backend {}: dimensions and hop must be positive",
                self.backend_id
            )));
        }
        if self.expected_sample_rate == 0 {
            return Err(Error::invalid("backend sample rate must be positive"));
        }
        Ok(())
    }
}

pub const XLSR: &str = "xlsr";
pub const HUBERT: &str = "hubert";

/// Known real backends. Both share the wav2vec2-style encoder geometry
/// (hop 320, receptive field 400 at 16 kHz).
pub fn registry() -> Vec<BackendDescriptor> {
    vec![
        BackendDescriptor {
            backend_id: XLSR.into(),
            fe_dim: 512,
            ol_dim: 1024,
            frame_hop: 320,
            receptive_field: 400,
            expected_sample_rate: 16000,
            ol_tap: "wav2vec2-xls-r-300m last_hidden_state (after final layer norm)".into(),
        },
        BackendDescriptor {
            backend_id: HUBERT.into(),
            fe_dim: 512,
            ol_dim: 768,
            frame_hop: 320,
            receptive_field: 400,
            expected_sample_rate: 16000,
            ol_tap: "final transformer layer output".into(),
        },
    ]
}

pub fn registry_entry(backend_id: &str) -> Option<BackendDescriptor> {
    registry().into_iter().find(|d| d.backend_id == backend_id)
}

/// A loaded speech-representation model.
pub trait FeatureBackend<S: Scalar>: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Convolutional feature-encoder output, T×fe_dim.
    fn encode(&self, samples: &[S]) -> Result<Matrix<S>>;

    /// Transformer output, T×ol_dim.
    fn contextualize(&self, samples: &[S]) -> Result<Matrix<S>>;

    /// Everything that changes the output for a fixed input; part of the cache key.
    fn fingerprint(&self) -> String {
        serde_json::to_string(self.descriptor()).unwrap_or_default()
    }
}

fn extract_stage<S: Scalar>(
    backend: &dyn FeatureBackend<S>,
    w: &Waveform<S>,
    channel: Channel,
    kind: FeatureKind,
) -> Result<FeatureMatrix<S>> {
    let d = backend.descriptor();
    d.validate()?;
    if w.sample_rate() != d.expected_sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: d.expected_sample_rate,
            found: w.sample_rate(),
        });
    }
    let x = w.channel(channel)?;
    let values = match kind {
        FeatureKind::Fe => backend.encode(x)?,
        FeatureKind::Ol => backend.contextualize(x)?,
        FeatureKind::Spec => unreachable!("spectrograms are not a backend stage"),
    };
    let expected = d.dim(kind)?;
    if values.cols() != expected {
        return Err(Error::ShapeMismatch {
            what: format!("{} {kind} feature dimension", d.backend_id),
            expected,
            found: values.cols(),
        });
    }
    let sr = d.expected_sample_rate as f64;
    FeatureMatrix::with_uniform_times(
        values,
        d.receptive_field as f64 / 2.0 / sr,
        d.frame_hop as f64 / sr,
        kind,
        d.backend_id.clone(),
        channel,
    )
}

pub fn extract_fe<S: Scalar>(
    backend: &dyn FeatureBackend<S>,
    w: &Waveform<S>,
    channel: Channel,
) -> Result<FeatureMatrix<S>> {
    extract_stage(backend, w, channel, FeatureKind::Fe)
}

pub fn extract_ol<S: Scalar>(
    backend: &dyn FeatureBackend<S>,
    w: &Waveform<S>,
    channel: Channel,
) -> Result<FeatureMatrix<S>> {
    extract_stage(backend, w, channel, FeatureKind::Ol)
}

/// Which representation feeds a model: the spectrogram or one backend stage.
/// Textual form is `SPEC` or `<backend_id>:<FE|OL>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureBinding {
    Spectrogram,
    Backend { backend_id: String, kind: FeatureKind },
}

impl FeatureBinding {
    pub fn backend(backend_id: impl Into<String>, kind: FeatureKind) -> Self {
        FeatureBinding::Backend {
            backend_id: backend_id.into(),
            kind,
        }
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureBinding::Spectrogram => FeatureKind::Spec,
            FeatureBinding::Backend { kind, .. } => *kind,
        }
    }

    pub fn backend_id(&self) -> Option<&str> {
        match self {
            FeatureBinding::Spectrogram => None,
            FeatureBinding::Backend { backend_id, .. } => Some(backend_id),
        }
    }

    /// Row label used in study and metric tables.
    pub fn representation(&self) -> String {
        match self {
            FeatureBinding::Spectrogram => "SPEC".into(),
            FeatureBinding::Backend { backend_id, .. } => backend_id.clone(),
        }
    }
}

impl fmt::Display for FeatureBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureBinding::Spectrogram => f.write_str("SPEC"),
            FeatureBinding::Backend { backend_id, kind } => write!(f, "{backend_id}:{kind}"),
        }
    }
}

impl FromStr for FeatureBinding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("SPEC") {
            return Ok(FeatureBinding::Spectrogram);
        }
        let (id, kind) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("binding '{s}' is not SPEC or <backend>:<FE|OL>")))?;
        let kind: FeatureKind = kind.parse()?;
        if kind == FeatureKind::Spec || id.is_empty() {
            return Err(Error::invalid(format!("invalid binding '{s}'")));
        }
        Ok(FeatureBinding::backend(id, kind))
    }
}

impl Serialize for FeatureBinding {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureBinding {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A binding together with whatever it needs to run.
#[derive(Clone)]
pub struct FeatureExtractor<S: Scalar> {
    binding: FeatureBinding,
    backend: Option<Arc<dyn FeatureBackend<S>>>,
    spectrogram: SpectrogramConfig,
}

impl<S: Scalar> fmt::Debug for FeatureExtractor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("binding", &self.binding)
            .finish()
    }
}

impl<S: Scalar> FeatureExtractor<S> {
    pub fn spectrogram(cfg: SpectrogramConfig) -> Self {
        Self {
            binding: FeatureBinding::Spectrogram,
            backend: None,
            spectrogram: cfg,
        }
    }

    pub fn backend(backend: Arc<dyn FeatureBackend<S>>, kind: FeatureKind) -> Result<Self> {
        if kind == FeatureKind::Spec {
            return Err(Error::invalid("backend extractors produce FE or OL features"));
        }
        Ok(Self {
            binding: FeatureBinding::backend(backend.descriptor().backend_id.clone(), kind),
            backend: Some(backend),
            spectrogram: SpectrogramConfig::default(),
        })
    }

    pub fn binding(&self) -> &FeatureBinding {
        &self.binding
    }

    pub fn feature_dim(&self) -> usize {
        match (&self.backend, self.binding.kind()) {
            (Some(b), FeatureKind::Fe) => b.descriptor().fe_dim,
            (Some(b), FeatureKind::Ol) => b.descriptor().ol_dim,
            _ => self.spectrogram.num_bins(),
        }
    }

    pub fn expected_sample_rate(&self) -> u32 {
        match &self.backend {
            Some(b) => b.descriptor().expected_sample_rate,
            None => self.spectrogram.sample_rate,
        }
    }

    /// Identifies everything that determines this extractor's output.
    pub fn fingerprint(&self) -> String {
        match &self.backend {
            Some(b) => format!("{}|{}", self.binding, b.fingerprint()),
            None => format!(
                "{}|{}",
                self.binding,
                serde_json::to_string(&self.spectrogram).unwrap_or_default()
            ),
        }
    }

    /// Frame hop in samples at the expected rate.
    pub fn frame_hop(&self) -> usize {
        match &self.backend {
            Some(b) => b.descriptor().frame_hop,
            None => self.spectrogram.hop_samples(),
        }
    }

    pub fn extract(&self, w: &Waveform<S>, channel: Channel) -> Result<FeatureMatrix<S>> {
        match (&self.backend, self.binding.kind()) {
            (Some(b), FeatureKind::Fe) => extract_fe(b.as_ref(), w, channel),
            (Some(b), FeatureKind::Ol) => extract_ol(b.as_ref(), w, channel),
            _ => extract_spectrogram(w, channel, &self.spectrogram),
        }
    }
}
