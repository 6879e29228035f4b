//! Frame-level representations: magnitude spectrogram and the two stages of a
//! self-supervised speech model (convolutional feature encoder, transformer output).
//!
//! Extraction is always per channel. Backends are immutable after construction
//! and can be shared across threads.

mod backend;
mod cache;
mod external;
mod mock;
mod spectrogram;

pub use backend::{
    extract_fe, extract_ol, registry, registry_entry, BackendDescriptor, FeatureBackend, FeatureBinding,
    FeatureExtractor, HUBERT, XLSR,
};
pub use cache::{read_feature_file, write_feature_file, CacheEntryMeta, FeatureCache};
pub use external::{ExternalBackend, MODEL_ROOT_ENV};
pub use mock::{register_mock_backend, ConvLayer, MockBackend, MOCK_CONV_WIDTH};
pub use spectrogram::{extract_spectrogram, SpectrogramConfig, SPECTROGRAM_ID};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Channel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "SPEC")]
    Spec,
    #[serde(rename = "FE")]
    Fe,
    #[serde(rename = "OL")]
    Ol,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Spec => "SPEC",
            FeatureKind::Fe => "FE",
            FeatureKind::Ol => "OL",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SPEC" | "SG" => Ok(FeatureKind::Spec),
            "FE" => Ok(FeatureKind::Fe),
            "OL" => Ok(FeatureKind::Ol),
            _ => Err(Error::invalid(format!("unknown feature kind '{s}'"))),
        }
    }
}

/// A T×F representation of one channel of one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    values: Matrix<S>,
    frame_times: Vec<f64>,
    kind: FeatureKind,
    backend_id: String,
    source_channel: Channel,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn new(
        values: Matrix<S>,
        frame_times: Vec<f64>,
        kind: FeatureKind,
        backend_id: impl Into<String>,
        source_channel: Channel,
    ) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::invalid(format!(
                "feature matrix must be non-empty, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if frame_times.len() != values.rows() {
            return Err(Error::ShapeMismatch {
                what: "frame_times".into(),
                expected: values.rows(),
                found: frame_times.len(),
            });
        }
        if frame_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frame times must be strictly increasing"));
        }
        if !values.all_finite() {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(Self {
            values,
            frame_times,
            kind,
            backend_id: backend_id.into(),
            source_channel,
        })
    }

    /// Evenly spaced frames: `t_k = offset + k * step`.
    pub fn with_uniform_times(
        values: Matrix<S>,
        offset_s: f64,
        step_s: f64,
        kind: FeatureKind,
        backend_id: impl Into<String>,
        source_channel: Channel,
    ) -> Result<Self> {
        let times = (0..values.rows()).map(|k| offset_s + k as f64 * step_s).collect();
        Self::new(values, times, kind, backend_id, source_channel)
    }

    /// Convenience constructor for tests and synthetic inputs (1-second frame spacing).
    pub fn from_rows(rows: &[Vec<S>], kind: FeatureKind) -> Result<Self> {
        Self::with_uniform_times(Matrix::from_rows(rows), 0.0, 1.0, kind, "synthetic", Channel::Left)
    }

    pub fn values(&self) -> &Matrix<S> {
        &self.values
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn source_channel(&self) -> Channel {
        self.source_channel
    }

    pub fn num_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn frame(&self, t: usize) -> &[S] {
        self.values.row(t)
    }
}
