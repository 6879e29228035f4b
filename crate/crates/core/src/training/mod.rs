//! Predictor training: per-channel summed loss, better-ear validation,
//! early stopping on validation RMSE.
//!
//! Sequences are not padded. Every utterance in a batch runs its own
//! forward and backward pass and the gradients are summed in batch order,
//! which gives the same result as masked padding without a mask.

mod history;
mod optim;

pub use history::{write_train_log, DatasetDigest, EpochRecord, TrainLog, TRAIN_LOG_CSV, RUN_MANIFEST_JSON};
pub use optim::{Adam, AdamParams};

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_correctness, DatasetSplit, SignalKind, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureBinding, FeatureMatrix};
use crate::predictor::{predict_features, PredictorModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
}

impl Loss {
    /// Loss and its derivative with respect to the prediction.
    pub fn eval(self, prediction: f64, target: f64) -> (f64, f64) {
        match self {
            Loss::Mse => {
                let e = prediction - target;
                (e * e, 2.0 * e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub seed: u64,
    pub loss: Loss,
    pub signal_kind: SignalKind,
    pub binding: FeatureBinding,
    #[serde(default)]
    pub adam: AdamParams,
    /// Also score the training set with the better-ear rule after each epoch.
    #[serde(default)]
    pub record_train_rmse: bool,
    /// Stop once the training RMSE (0-100) falls to this value.
    #[serde(default)]
    pub target_train_rmse: Option<f64>,
}

impl TrainConfig {
    pub fn new(binding: FeatureBinding, signal_kind: SignalKind) -> Self {
        Self {
            max_epochs: 100,
            batch_size: 8,
            learning_rate: 1e-4,
            patience: 10,
            seed: 0,
            loss: Loss::Mse,
            signal_kind,
            binding,
            adam: AdamParams::default(),
            record_train_rmse: false,
            target_train_rmse: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "max_epochs, patience and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Per-channel features for an utterance, left channel first.
pub trait FeatureSource<S: Scalar>: Sync {
    fn channel_features(&self, record: &UtteranceRecord, kind: SignalKind) -> Result<Vec<FeatureMatrix<S>>>;
}

/// Features held in memory, keyed by utterance id. The signal kind is ignored.
#[derive(Debug, Clone, Default)]
pub struct InMemoryFeatures<S> {
    map: HashMap<String, Vec<FeatureMatrix<S>>>,
}

impl<S: Scalar> InMemoryFeatures<S> {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    pub fn insert(&mut self, utterance_id: impl Into<String>, channels: Vec<FeatureMatrix<S>>) {
        self.map.insert(utterance_id.into(), channels);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<S: Scalar> FeatureSource<S> for InMemoryFeatures<S> {
    fn channel_features(&self, record: &UtteranceRecord, _kind: SignalKind) -> Result<Vec<FeatureMatrix<S>>> {
        self.map
            .get(&record.utterance_id)
            .cloned()
            .ok_or_else(|| Error::MissingFeatures(record.utterance_id.clone()))
    }
}

/// One utterance ready for training: normalised target and channel features.
#[derive(Debug, Clone)]
pub struct Example<S> {
    pub utterance_id: String,
    pub target: f64,
    pub channels: Vec<FeatureMatrix<S>>,
}

/// Fetch features for `records` in parallel, preserving record order.
pub fn load_examples<S: Scalar>(
    records: &[UtteranceRecord],
    source: &dyn FeatureSource<S>,
    kind: SignalKind,
) -> Result<Vec<Example<S>>> {
    records
        .par_iter()
        .map(|r| {
            let channels = source
                .channel_features(r, kind)
                .map_err(|e| e.with_utterance(&r.utterance_id))?;
            if channels.is_empty() || channels.len() > 2 {
                return Err(Error::invalid(format!(
                    "{}: expected 1 or 2 channels, got {}",
                    r.utterance_id,
                    channels.len()
                )));
            }
            Ok(Example {
                utterance_id: r.utterance_id.clone(),
                target: normalize_correctness(r.correctness)?,
                channels,
            })
        })
        .collect()
}

/// `L(left) + L(right)` against the same target; mono input uses the left loss alone.
pub fn channel_summed_loss<S: Scalar>(
    model: &PredictorModel<S>,
    left: &FeatureMatrix<S>,
    right: Option<&FeatureMatrix<S>>,
    target: f64,
    loss: Loss,
) -> Result<f64> {
    let mut total = loss.eval(model.forward_channel(left)?.as_f64(), target).0;
    if let Some(r) = right {
        total += loss.eval(model.forward_channel(r)?.as_f64(), target).0;
    }
    Ok(total)
}

/// Training observers. All methods default to no-ops.
pub trait TrainHooks<S> {
    /// Called for every training utterance with its per-channel losses and their sum.
    fn on_train_example(&mut self, _utterance_id: &str, _channel_losses: &[f64], _total: f64) {}
    /// Called for every validation utterance with its per-channel scores and the pooled score.
    fn on_validation_example(&mut self, _utterance_id: &str, _channel_scores: &[f64], _i_hat: f64) {}
    fn on_epoch_end(&mut self, _record: &EpochRecord, _model: &PredictorModel<S>) {}
}

pub struct NoHooks;

impl<S> TrainHooks<S> for NoHooks {}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record the metric for `epoch`; returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

struct ExampleGrad<S> {
    grad: Vec<S>,
    channel_losses: Vec<f64>,
    total: f64,
}

fn example_gradient<S: Scalar>(
    model: &PredictorModel<S>,
    ex: &Example<S>,
    loss: Loss,
    scale: f64,
) -> Result<ExampleGrad<S>> {
    let mut grad = vec![S::zero(); model.parameter_count()];
    let mut channel_losses = Vec::with_capacity(ex.channels.len());
    for ch in &ex.channels {
        let pass = model.forward_cached(ch).map_err(|e| e.with_utterance(&ex.utterance_id))?;
        let (l, dl) = loss.eval(pass.output().as_f64(), ex.target);
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss {
                utterance_id: ex.utterance_id.clone(),
            });
        }
        model.backward(&pass, S::lit(dl * scale), &mut grad);
        channel_losses.push(l);
    }
    let total = channel_losses.iter().sum();
    Ok(ExampleGrad {
        grad,
        channel_losses,
        total,
    })
}

/// Better-ear RMSE on the 0-100 scale.
pub fn better_ear_rmse<S: Scalar>(
    model: &PredictorModel<S>,
    examples: &[Example<S>],
    hooks: Option<&mut dyn TrainHooks<S>>,
) -> Result<f64> {
    let preds = examples
        .par_iter()
        .map(|ex| predict_features(model, &ex.utterance_id, &ex.channels))
        .collect::<Result<Vec<_>>>()?;
    let mut hooks = hooks;
    let mut sq = 0.0;
    for (ex, p) in examples.iter().zip(&preds) {
        if let Some(h) = hooks.as_deref_mut() {
            let mut scores = vec![p.per_channel.left];
            scores.extend(p.per_channel.right);
            h.on_validation_example(&ex.utterance_id, &scores, p.i_hat);
        }
        let e = 100.0 * (p.i_hat - ex.target);
        sq += e * e;
    }
    Ok((sq / examples.len() as f64).sqrt())
}

pub fn train<S: Scalar>(
    model: PredictorModel<S>,
    split: &DatasetSplit,
    source: &dyn FeatureSource<S>,
    cfg: &TrainConfig,
) -> Result<(PredictorModel<S>, TrainLog)> {
    train_with_hooks(model, split, source, cfg, &mut NoHooks)
}

pub fn train_with_hooks<S: Scalar>(
    mut model: PredictorModel<S>,
    split: &DatasetSplit,
    source: &dyn FeatureSource<S>,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks<S>,
) -> Result<(PredictorModel<S>, TrainLog)> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    if &cfg.binding != model.binding() {
        return Err(Error::Config(format!(
            "training config uses {} but the model is bound to {}",
            cfg.binding,
            model.binding()
        )));
    }
    let train_set = load_examples(&split.train, source, cfg.signal_kind)?;
    let val_set = load_examples(&split.validation, source, cfg.signal_kind)?;
    let dataset = DatasetDigest::new(&split.train, &split.validation);
    log::info!(
        "training {} parameters on {} utterances, validating on {}",
        model.parameter_count(),
        train_set.len(),
        val_set.len()
    );

    model.set_train_seed(Some(cfg.seed));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut opt = Adam::new(model.parameter_count(), cfg.learning_rate, cfg.adam);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().to_vec();
    let mut records = Vec::new();
    let mut stopped_early = false;
    let start = Instant::now();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let grads = batch
                .par_iter()
                .map(|&i| example_gradient(&model, &train_set[i], cfg.loss, scale))
                .collect::<Result<Vec<_>>>()?;
            let mut total = vec![S::zero(); model.parameter_count()];
            for (&i, g) in batch.iter().zip(&grads) {
                hooks.on_train_example(&train_set[i].utterance_id, &g.channel_losses, g.total);
                epoch_loss += g.total;
                for (t, &v) in total.iter_mut().zip(&g.grad) {
                    *t += v;
                }
            }
            opt.step(model.params_mut(), &total);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let validation_rmse = better_ear_rmse(&model, &val_set, Some(&mut *hooks))?;
        let train_rmse = if cfg.record_train_rmse || cfg.target_train_rmse.is_some() {
            Some(better_ear_rmse(&model, &train_set, None)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            validation_rmse,
            train_rmse,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.6}, validation RMSE {validation_rmse:.3}"
        );
        hooks.on_epoch_end(&record, &model);
        records.push(record);

        let stop = stopper.observe(epoch, validation_rmse);
        if stopper.improved_at(epoch) {
            best_params.copy_from_slice(model.params());
        }
        let reached_target = matches!((cfg.target_train_rmse, train_rmse), (Some(t), Some(r)) if r <= t);
        if stop || reached_target {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }

    model.params_mut().copy_from_slice(&best_params);
    let log = TrainLog {
        config: cfg.clone(),
        records,
        best_epoch: stopper.best_epoch(),
        stopped_early,
        parameter_count: model.parameter_count(),
        dataset,
        final_checkpoint: None,
    };
    Ok((model, log))
}
