//! Non-intrusive correctness predictor.
//!
//! Per channel: frames → BLSTM → BLSTM → attention pooling → linear → sigmoid.
//! The pooling head scores each frame with a two-layer MLP (ReLU), softmaxes
//! the scores over time and feeds the weighted frame average to a single
//! output unit. Binaural utterances are scored as the maximum over channels.
//!
//! LSTM cells carry separate input and recurrent biases and use the gate
//! order input, forget, cell, output.

mod checkpoint;
mod network;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use network::ForwardPass;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Channel, Waveform};
use crate::error::{Error, Result};
use crate::features::{FeatureBinding, FeatureExtractor, FeatureMatrix};
use crate::scalar::Scalar;

pub const BLSTM_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub blstm_layers: usize,
    /// Hidden units per direction.
    pub blstm_hidden: usize,
    /// Width of the frame-scoring MLP in the pooling head.
    pub attention_hidden: usize,
}

impl ModelConfig {
    /// `blstm_hidden = max(1, floor(F / 2))`, attention width twice the BLSTM output width.
    pub fn for_features(feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be at least 1"));
        }
        let blstm_hidden = (feature_dim / 2).max(1);
        Ok(Self {
            feature_dim,
            blstm_layers: BLSTM_LAYERS,
            blstm_hidden,
            attention_hidden: 4 * blstm_hidden,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.blstm_hidden == 0 || self.attention_hidden == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if self.blstm_layers != BLSTM_LAYERS {
            return Err(Error::invalid(format!(
                "exactly {BLSTM_LAYERS} BLSTM layers are supported"
            )));
        }
        Ok(())
    }

    /// Width of a BLSTM layer output (both directions).
    pub fn embed_dim(&self) -> usize {
        2 * self.blstm_hidden
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.feature_dim
        } else {
            self.embed_dim()
        }
    }

    pub fn parameter_count(&self) -> usize {
        ParamLayout::new(self).total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of the named weight blocks inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmSlots {
    pub w_ih: Range<usize>,
    pub w_hh: Range<usize>,
    pub b_ih: Range<usize>,
    pub b_hh: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct HeadSlots {
    pub att1_w: Range<usize>,
    pub att1_b: Range<usize>,
    pub att2_w: Range<usize>,
    pub att2_b: Range<usize>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
}

const DIRECTIONS: [&str; 2] = ["fwd", "bwd"];

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let h = cfg.blstm_hidden;
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            segments.push(Segment {
                name,
                rows,
                cols,
                offset,
            });
            offset += rows * cols;
        };
        for layer in 0..cfg.blstm_layers {
            let input = cfg.layer_input_dim(layer);
            for dir in DIRECTIONS {
                push(format!("blstm{layer}.{dir}.w_ih"), 4 * h, input);
                push(format!("blstm{layer}.{dir}.w_hh"), 4 * h, h);
                push(format!("blstm{layer}.{dir}.b_ih"), 4 * h, 1);
                push(format!("blstm{layer}.{dir}.b_hh"), 4 * h, 1);
            }
        }
        let d = cfg.embed_dim();
        let a = cfg.attention_hidden;
        push("pool.att1.w".into(), a, d);
        push("pool.att1.b".into(), a, 1);
        push("pool.att2.w".into(), 1, a);
        push("pool.att2.b".into(), 1, 1);
        push("out.w".into(), 1, d);
        push("out.b".into(), 1, 1);
        Self {
            segments,
            total: offset,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    fn range(&self, name: &str) -> Range<usize> {
        self.segment(name).expect("segment exists").range()
    }

    pub(crate) fn lstm(&self, layer: usize, dir: usize) -> LstmSlots {
        let p = format!("blstm{layer}.{}", DIRECTIONS[dir]);
        LstmSlots {
            w_ih: self.range(&format!("{p}.w_ih")),
            w_hh: self.range(&format!("{p}.w_hh")),
            b_ih: self.range(&format!("{p}.b_ih")),
            b_hh: self.range(&format!("{p}.b_hh")),
        }
    }

    pub(crate) fn head(&self) -> HeadSlots {
        HeadSlots {
            att1_w: self.range("pool.att1.w"),
            att1_b: self.range("pool.att1.b"),
            att2_w: self.range("pool.att2.w"),
            att2_b: self.range("pool.att2.b"),
            out_w: self.range("out.w"),
            out_b: self.range("out.b"),
        }
    }
}

/// Network weights bound to the representation they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel<S> {
    config: ModelConfig,
    layout: ParamLayout,
    params: Vec<S>,
    binding: FeatureBinding,
    init_seed: u64,
    train_seed: Option<u64>,
}

/// Seeded initialisation: every block uniform in `±1/sqrt(fan)`, where fan is
/// the hidden size for LSTM blocks and the input width for linear layers.
pub fn build_model<S: Scalar>(feature_dim: usize, binding: FeatureBinding, seed: u64) -> Result<PredictorModel<S>> {
    build_model_with(ModelConfig::for_features(feature_dim)?, binding, seed)
}

pub fn build_model_with<S: Scalar>(config: ModelConfig, binding: FeatureBinding, seed: u64) -> Result<PredictorModel<S>> {
    config.validate()?;
    let layout = ParamLayout::new(&config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![S::zero(); layout.total];
    let lstm_bound = 1.0 / (config.blstm_hidden as f64).sqrt();
    for seg in &layout.segments {
        let bound = if seg.name.starts_with("blstm") {
            lstm_bound
        } else {
            let fan_in = match seg.name.as_str() {
                "pool.att1.w" | "pool.att1.b" | "out.w" | "out.b" => config.embed_dim(),
                _ => config.attention_hidden,
            };
            1.0 / (fan_in as f64).sqrt()
        };
        for p in &mut params[seg.range()] {
            *p = S::lit(rng.gen_range(-bound..bound));
        }
    }
    Ok(PredictorModel {
        config,
        layout,
        params,
        binding,
        init_seed: seed,
        train_seed: None,
    })
}

impl<S: Scalar> PredictorModel<S> {
    pub(crate) fn from_parts(
        config: ModelConfig,
        params: Vec<S>,
        binding: FeatureBinding,
        init_seed: u64,
        train_seed: Option<u64>,
    ) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            return Err(Error::ShapeMismatch {
                what: "parameter vector".into(),
                expected: layout.total,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self {
            config,
            layout,
            params,
            binding,
            init_seed,
            train_seed,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn binding(&self) -> &FeatureBinding {
        &self.binding
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn train_seed(&self) -> Option<u64> {
        self.train_seed
    }

    pub fn set_train_seed(&mut self, seed: Option<u64>) {
        self.train_seed = seed;
    }

    fn check_input(&self, feats: &FeatureMatrix<S>) -> Result<()> {
        if feats.dim() != self.config.feature_dim {
            return Err(Error::ShapeMismatch {
                what: "model input feature dimension".into(),
                expected: self.config.feature_dim,
                found: feats.dim(),
            });
        }
        Ok(())
    }

    /// Predicted correctness fraction for one channel, in (0, 1).
    pub fn forward_channel(&self, feats: &FeatureMatrix<S>) -> Result<S> {
        Ok(self.forward_cached(feats)?.output())
    }

    /// Forward pass keeping the activations needed by [`PredictorModel::backward`].
    pub fn forward_cached(&self, feats: &FeatureMatrix<S>) -> Result<ForwardPass<S>> {
        self.check_input(feats)?;
        Ok(network::forward(self, feats))
    }

    /// Adds `d_out * d(output)/d(params)` to `grad`.
    pub fn backward(&self, pass: &ForwardPass<S>, d_out: S, grad: &mut [S]) {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length");
        network::backward(self, pass, d_out, grad);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScores {
    pub left: f64,
    pub right: Option<f64>,
}

/// Utterance-level prediction. `i_hat` is the better-ear maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub utterance_id: String,
    pub i_hat: f64,
    pub per_channel: ChannelScores,
}

impl Prediction {
    pub fn from_channels(utterance_id: impl Into<String>, left: f64, right: Option<f64>) -> Self {
        let i_hat = right.map_or(left, |r| left.max(r));
        Self {
            utterance_id: utterance_id.into(),
            i_hat,
            per_channel: ChannelScores { left, right },
        }
    }
}

/// Score pre-extracted channel features (left first).
pub fn predict_features<S: Scalar>(
    model: &PredictorModel<S>,
    utterance_id: &str,
    channels: &[FeatureMatrix<S>],
) -> Result<Prediction> {
    let score = |f: &FeatureMatrix<S>| -> Result<f64> {
        Ok(model.forward_channel(f).map_err(|e| e.with_utterance(utterance_id))?.as_f64())
    };
    match channels {
        [left] => Ok(Prediction::from_channels(utterance_id, score(left)?, None)),
        [left, right] => Ok(Prediction::from_channels(utterance_id, score(left)?, Some(score(right)?))),
        _ => Err(Error::invalid(format!("expected 1 or 2 channels, got {}", channels.len()))),
    }
}

/// Extract features for every channel of `w` and apply the better-ear rule.
pub fn predict_utterance<S: Scalar>(
    model: &PredictorModel<S>,
    utterance_id: &str,
    w: &Waveform<S>,
    extractor: &FeatureExtractor<S>,
) -> Result<Prediction> {
    if extractor.binding() != model.binding() {
        return Err(Error::Config(format!(
            "model is bound to {} but extractor produces {}",
            model.binding(),
            extractor.binding()
        )));
    }
    let feats = w
        .channel_labels()
        .into_iter()
        .map(|ch: Channel| extractor.extract(w, ch))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.with_utterance(utterance_id))?;
    predict_features(model, utterance_id, &feats)
}

#[cfg(test)]
mod tests;
