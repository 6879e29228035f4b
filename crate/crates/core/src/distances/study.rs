use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mse_distance_aligned, Alignment, Measure};
use crate::corpus::{Channel, SignalKind, UtteranceRecord, WaveformSource};
use crate::error::{Error, Result};
use crate::features::{
    extract_fe, extract_ol, extract_spectrogram, FeatureBackend, SpectrogramConfig, SPECTROGRAM_ID,
};
use crate::scalar::Scalar;
use crate::stats::{pearson, spearman};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub utterance_id: String,
    /// `SPEC` or the backend id.
    pub representation: String,
    pub measure: Measure,
    pub test_signal_kind: SignalKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySkip {
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DistanceStudy {
    pub results: Vec<DistanceResult>,
    pub skipped: Vec<StudySkip>,
}

pub struct DistanceStudyConfig<S: Scalar> {
    pub spectrogram: SpectrogramConfig,
    pub backends: Vec<Arc<dyn FeatureBackend<S>>>,
    pub signal_kinds: Vec<SignalKind>,
    pub alignment: Alignment,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

impl<S: Scalar> DistanceStudyConfig<S> {
    pub fn new(backends: Vec<Arc<dyn FeatureBackend<S>>>, signal_kinds: Vec<SignalKind>) -> Self {
        Self {
            spectrogram: SpectrogramConfig::default(),
            backends,
            signal_kinds,
            alignment: Alignment::Truncate,
            jobs: 0,
        }
    }
}

fn study_record<S: Scalar>(
    rec: &UtteranceRecord,
    source: &dyn WaveformSource<S>,
    cfg: &DistanceStudyConfig<S>,
) -> Result<Vec<DistanceResult>> {
    let clean_ref = rec
        .clean_audio_ref
        .as_ref()
        .ok_or_else(|| Error::invalid("missing clean reference"))?;
    let clean = source.load(clean_ref)?;
    let ch = Channel::Left;
    let clean_sg = extract_spectrogram(&clean, ch, &cfg.spectrogram)?;
    let clean_stages = cfg
        .backends
        .iter()
        .map(|b| Ok((extract_fe(b.as_ref(), &clean, ch)?, extract_ol(b.as_ref(), &clean, ch)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(cfg.signal_kinds.len() * (1 + 2 * cfg.backends.len()));
    for &kind in &cfg.signal_kinds {
        let test_ref = rec
            .audio_ref(kind)
            .ok_or_else(|| Error::invalid(format!("missing {kind} signal")))?;
        let test = source.load(test_ref)?;
        let mut push = |representation: &str, measure: Measure, value: S| {
            out.push(DistanceResult {
                utterance_id: rec.utterance_id.clone(),
                representation: representation.to_string(),
                measure,
                test_signal_kind: kind,
                value: value.as_f64(),
            });
        };
        let sg = extract_spectrogram(&test, ch, &cfg.spectrogram)?;
        push(SPECTROGRAM_ID, Measure::Sg, mse_distance_aligned(&clean_sg, &sg, cfg.alignment)?);
        for (b, (clean_fe, clean_ol)) in cfg.backends.iter().zip(&clean_stages) {
            let id = &b.descriptor().backend_id;
            let fe = extract_fe(b.as_ref(), &test, ch)?;
            push(id, Measure::Fe, mse_distance_aligned(clean_fe, &fe, cfg.alignment)?);
            let ol = extract_ol(b.as_ref(), &test, ch)?;
            push(id, Measure::Ol, mse_distance_aligned(clean_ol, &ol, cfg.alignment)?);
        }
    }
    Ok(out)
}

/// Left-channel distances between each record's clean reference and its
/// processed signals. Failing records are skipped and reported; results are
/// ordered by utterance id regardless of worker count.
pub fn run_distance_study<S: Scalar>(
    records: &[UtteranceRecord],
    source: &dyn WaveformSource<S>,
    cfg: &DistanceStudyConfig<S>,
) -> Result<DistanceStudy> {
    let mut ordered: Vec<&UtteranceRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let per_record: Vec<Result<Vec<DistanceResult>>> =
        pool.install(|| ordered.par_iter().map(|r| study_record(r, source, cfg)).collect());

    let mut study = DistanceStudy::default();
    for (rec, res) in ordered.iter().zip(per_record) {
        match res {
            Ok(rows) => study.results.extend(rows),
            Err(e) => {
                log::warn!("distance study: skipping {}: {e}", rec.utterance_id);
                study.skipped.push(StudySkip {
                    utterance_id: rec.utterance_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(study)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub representation: String,
    pub measure: Measure,
    pub test_signal_kind: SignalKind,
    /// `None` when undefined (see `note`).
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub n: usize,
    pub note: Option<String>,
}

/// One row per (representation, measure, signal kind), in first-appearance order.
pub fn correlate_with_correctness(
    results: &[DistanceResult],
    records: &[UtteranceRecord],
) -> Vec<CorrelationRow> {
    let correctness: HashMap<&str, f64> = records
        .iter()
        .map(|r| (r.utterance_id.as_str(), r.correctness))
        .collect();
    let mut order: Vec<(String, Measure, SignalKind)> = Vec::new();
    let mut groups: HashMap<(String, Measure, SignalKind), Vec<(&str, f64, f64)>> = HashMap::new();
    for r in results {
        let Some(&c) = correctness.get(r.utterance_id.as_str()) else {
            continue;
        };
        let key = (r.representation.clone(), r.measure, r.test_signal_kind);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push((&r.utterance_id, r.value, c));
    }
    order
        .into_iter()
        .map(|key| {
            let mut pairs = groups.remove(&key).unwrap_or_default();
            pairs.sort_by(|a, b| a.0.cmp(b.0));
            let d: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let c: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let s = spearman(&d, &c);
            let p = pearson(&d, &c);
            let note = s.as_ref().err().or(p.as_ref().err()).map(|e| e.to_string());
            CorrelationRow {
                representation: key.0,
                measure: key.1,
                test_signal_kind: key.2,
                spearman: s.ok(),
                pearson: p.ok(),
                n: pairs.len(),
                note,
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// `utterance_id,representation,measure,signal_kind,value`.
pub fn write_distance_csv(path: &Path, results: &[DistanceResult]) -> Result<()> {
    let mut out = String::from("utterance_id,representation,measure,signal_kind,value\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.utterance_id, r.representation, r.measure, r.test_signal_kind, r.value
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `representation,measure,signal_kind,spearman,pearson,n`; undefined correlations are `NaN`.
pub fn write_correlation_csv(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let mut out = String::from("representation,measure,signal_kind,spearman,pearson,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.representation,
            r.measure,
            r.test_signal_kind,
            fmt_opt(r.spearman),
            fmt_opt(r.pearson),
            r.n
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
