//! Non-intrusive speech intelligibility prediction for hearing-aid listeners.
//!
//! Frame-level features (an STFT magnitude spectrogram or the encoder /
//! output-layer states of a self-supervised speech model) feed a two-layer
//! BLSTM with attention pooling that predicts the fraction of words a listener
//! repeats correctly. Binaural trials are scored per ear and the better ear wins.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod corpus;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod pipeline;
pub mod predictor;
pub mod scalar;
pub mod stats;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::{Dtype, Scalar};

pub type Waveform32 = corpus::Waveform<f32>;
pub type Waveform64 = corpus::Waveform<f64>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type FeatureExtractor32 = features::FeatureExtractor<f32>;
pub type FeatureExtractor64 = features::FeatureExtractor<f64>;
pub type PredictorModel32 = predictor::PredictorModel<f32>;
pub type PredictorModel64 = predictor::PredictorModel<f64>;
pub type Matrix32 = tensor::Matrix<f32>;
pub type Matrix64 = tensor::Matrix<f64>;
