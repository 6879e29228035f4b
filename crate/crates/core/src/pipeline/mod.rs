//! End-to-end commands driven by a [`RunConfig`].

mod config;
mod source;

pub use config::{BackendSpec, Precision, RunConfig, RunPaths, TrainSettings};
pub use source::CachedFeatures;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{correctness_histogram, load_manifest, load_waveform, make_split_with, AudioDir, UtteranceRecord};
use crate::distances::{
    correlate_with_correctness, run_distance_study, write_correlation_csv, write_distance_csv, CorrelationRow,
    DistanceStudy, DistanceStudyConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    breakdown, histogram_chart, predictions_csv, render_report, score_with, GroupBreakdown, GroupKind, MetricSummary, ReportBundle,
    VarDefinition, HISTOGRAM_SVG, PREDICTIONS_CSV,
};
use crate::features::{FeatureBackend, FeatureCache};
use crate::predictor::{build_model, load_checkpoint, predict_features, save_checkpoint, Prediction};
use crate::scalar::Scalar;
use crate::training::{train, write_train_log, FeatureSource, TrainLog};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const DISTANCE_CSV: &str = "distances.csv";
pub const CORRELATION_CSV: &str = "correlations.csv";
pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemFailure {
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub stored: usize,
    pub skipped: usize,
    pub failures: Vec<ItemFailure>,
}

fn manifest_records(cfg: &RunConfig, include_test: bool) -> Result<(Vec<UtteranceRecord>, Vec<ItemFailure>)> {
    let mut paths = vec![cfg.paths.manifest.clone()];
    if include_test {
        paths.extend(cfg.paths.test_manifest.clone());
    }
    let mut records: Vec<UtteranceRecord> = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = BTreeSet::new();
    for p in paths {
        let load = load_manifest(&p, cfg.track)?;
        rejected.extend(load.rejected.into_iter().map(|r| ItemFailure {
            utterance_id: r.utterance_id,
            reason: format!("{}: {}", p.display(), r.reason),
        }));
        for r in load.records {
            if seen.insert(r.utterance_id.clone()) {
                records.push(r);
            }
        }
    }
    Ok((records, rejected))
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok(pool.install(f))
}

/// Fills the feature cache for the configured binding over the training and
/// test manifests. Valid entries are skipped.
pub fn cmd_extract<S: Scalar>(cfg: &RunConfig) -> Result<ExtractSummary> {
    cfg.validate()?;
    let (records, rejected) = manifest_records(cfg, true)?;
    let extractor = cfg.extractor::<S>()?;
    let fingerprint = extractor.fingerprint();
    let cache = FeatureCache::open(&cfg.paths.cache_dir)?;
    let rate = extractor.expected_sample_rate();

    let one = |r: &UtteranceRecord| -> Result<(usize, usize)> {
        let (path, bytes) = source::read_audio(&cfg.paths.audio_root, r, cfg.signal_kind)?;
        let keys = source::channel_keys(&bytes, &path, &fingerprint)?;
        let todo: Vec<_> = keys.iter().filter(|(_, k)| !cache.is_valid(k)).collect();
        if todo.is_empty() {
            return Ok((0, keys.len()));
        }
        let w = load_waveform::<S>(&path, rate)?;
        for (ch, key) in &todo {
            let fm = extractor.extract(&w, *ch)?;
            cache.store(&source::entry_meta(key.clone(), r, &extractor, &fm), &fm)?;
        }
        Ok((todo.len(), keys.len() - todo.len()))
    };
    let results: Vec<Result<(usize, usize)>> = in_pool(cfg.jobs, || records.par_iter().map(one).collect())?;

    let mut summary = ExtractSummary {
        failures: rejected,
        ..Default::default()
    };
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok((stored, skipped)) => {
                summary.stored += stored;
                summary.skipped += skipped;
            }
            Err(e) => {
                log::warn!("extract {}: {e}", r.utterance_id);
                summary.failures.push(ItemFailure {
                    utterance_id: r.utterance_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct DistanceOutcome {
    pub study: DistanceStudy,
    pub correlations: Vec<CorrelationRow>,
    pub distance_csv: PathBuf,
    pub correlation_csv: PathBuf,
}

/// Distances between clean references and processed signals for the
/// spectrogram and every configured backend, plus their correlation with correctness.
pub fn cmd_distance_study<S: Scalar>(cfg: &RunConfig) -> Result<DistanceOutcome> {
    cfg.validate()?;
    let (records, _) = manifest_records(cfg, false)?;
    let backends = cfg
        .backends
        .iter()
        .map(|b| b.instantiate::<S>())
        .collect::<Result<Vec<Arc<dyn FeatureBackend<S>>>>>()?;
    let rate = cfg.spectrogram.sample_rate;
    if let Some(b) = backends.iter().find(|b| b.descriptor().expected_sample_rate != rate) {
        return Err(Error::Config(format!(
            "backend {} expects {} Hz but the spectrogram runs at {rate} Hz",
            b.descriptor().backend_id,
            b.descriptor().expected_sample_rate
        )));
    }
    let mut study_cfg = DistanceStudyConfig::new(backends, cfg.distance_signal_kinds.clone());
    study_cfg.spectrogram = cfg.spectrogram.clone();
    study_cfg.jobs = cfg.jobs;
    let audio = AudioDir::new(&cfg.paths.audio_root, rate);
    let study = run_distance_study(&records, &audio, &study_cfg)?;
    let correlations = correlate_with_correctness(&study.results, &records);

    std::fs::create_dir_all(&cfg.paths.out_dir).map_err(|e| Error::io(&cfg.paths.out_dir, e))?;
    let distance_csv = cfg.paths.out_dir.join(DISTANCE_CSV);
    let correlation_csv = cfg.paths.out_dir.join(CORRELATION_CSV);
    write_distance_csv(&distance_csv, &study.results)?;
    write_correlation_csv(&correlation_csv, &correlations)?;
    Ok(DistanceOutcome {
        study,
        correlations,
        distance_csv,
        correlation_csv,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: TrainLog,
}

/// Trains on cached features and writes the checkpoint, `train_log.csv` and
/// `run_manifest.json` to `out_dir`.
pub fn cmd_train<S: Scalar>(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (records, _) = manifest_records(cfg, false)?;
    let split = make_split_with(&records, cfg.validation_fraction, cfg.seed, cfg.split_mode)?;
    let extractor = cfg.extractor::<S>()?;
    let cache = FeatureCache::open(&cfg.paths.cache_dir)?;
    let source = CachedFeatures::new(cache, &cfg.paths.audio_root, &extractor);
    let model = build_model::<S>(extractor.feature_dim(), extractor.binding().clone(), cfg.seed)?;
    let (model, mut log) = in_pool(cfg.jobs, || train(model, &split, &source, &cfg.train_config()))??;

    let checkpoint = cfg.paths.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&model, &checkpoint)?;
    log.final_checkpoint = Some(checkpoint.clone());
    write_train_log(&log, &cfg.paths.out_dir)?;
    Ok(TrainOutcome { checkpoint, log })
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub predictions: Vec<Prediction>,
    pub summary: MetricSummary,
    pub breakdowns: Vec<GroupBreakdown>,
    pub bundle: ReportBundle,
}

#[derive(Serialize)]
struct MetricsSidecar<'a> {
    summary: &'a MetricSummary,
    var_definition: &'static str,
    checkpoint: &'a Path,
    test_manifest: &'a Path,
}

/// Scores the test manifest with a checkpoint. The checkpoint must have been
/// trained on the configured binding and feature dimension.
pub fn cmd_evaluate<S: Scalar>(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalOutcome> {
    cfg.validate()?;
    let model = load_checkpoint::<S>(checkpoint)?;
    if model.binding() != &cfg.binding {
        return Err(Error::Config(format!(
            "checkpoint is bound to {} but the config selects {}",
            model.binding(),
            cfg.binding
        )));
    }
    let extractor = cfg.extractor::<S>()?;
    if extractor.feature_dim() != model.config().feature_dim {
        return Err(Error::ShapeMismatch {
            what: "checkpoint feature dimension".into(),
            expected: extractor.feature_dim(),
            found: model.config().feature_dim,
        });
    }
    let test_path = cfg
        .paths
        .test_manifest
        .clone()
        .ok_or_else(|| Error::Config("paths.test_manifest is required for evaluate".into()))?;
    let test = load_manifest(&test_path, cfg.track)?.records;
    let (train_records, _) = manifest_records(cfg, false)?;
    let cache = FeatureCache::open(&cfg.paths.cache_dir)?;
    let source = CachedFeatures::new(cache, &cfg.paths.audio_root, &extractor);

    let predictions = in_pool(cfg.jobs, || {
        test.par_iter()
            .map(|r| {
                let feats = FeatureSource::<S>::channel_features(&source, r, cfg.signal_kind)
                    .map_err(|e| e.with_utterance(&r.utterance_id))?;
                predict_features(&model, &r.utterance_id, &feats)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let summary = score_with(&predictions, &test, &cfg.model_name(), VarDefinition::default())?;
    let breakdowns = [GroupKind::System, GroupKind::Listener]
        .into_iter()
        .map(|k| breakdown(&predictions, &test, k, &k.ids(&train_records)))
        .collect::<Result<Vec<_>>>()?;
    let hist = correctness_histogram(&test, HISTOGRAM_BINS)?;
    let out = &cfg.paths.out_dir;
    let bundle = render_report(std::slice::from_ref(&summary), &breakdowns, Some(&hist), out)?;

    let pred_path = out.join(PREDICTIONS_CSV);
    std::fs::write(&pred_path, predictions_csv(&predictions, &test)?).map_err(|e| Error::io(&pred_path, e))?;
    let sidecar = MetricsSidecar {
        summary: &summary,
        var_definition: summary.var_definition.describe(),
        checkpoint,
        test_manifest: &test_path,
    };
    let json_path = out.join("metrics.json");
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;

    Ok(EvalOutcome {
        predictions,
        summary,
        breakdowns,
        bundle,
    })
}

/// Correctness histogram and listener means over the training manifest and,
/// when configured, the test manifest.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (records, _) = manifest_records(cfg, true)?;
    let hist = correctness_histogram(&records, HISTOGRAM_BINS)?;
    let out = &cfg.paths.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let bins = out.join("histogram_bins.csv");
    let listeners = out.join("listener_means.csv");
    let chart = out.join(HISTOGRAM_SVG);
    hist.write_bins_csv(&bins)?;
    hist.write_listener_csv(&listeners)?;
    std::fs::write(&chart, histogram_chart(&hist)).map_err(|e| Error::io(&chart, e))?;
    Ok(vec![bins, listeners, chart])
}
