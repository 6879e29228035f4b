//! Adapter from the public challenge JSON layout to [`UtteranceRecord`].
//!
//! A manifest is a JSON array of trial objects. Required keys are `signal`,
//! `listener`, `system` and `correctness`; `scene` is used to locate the clean
//! reference. Audio locators default to a naming convention relative to the
//! audio root and may be overridden per trial with `enhanced_path`,
//! `hls_path` and `clean_path`.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{AudioRef, Audiogram, Audiograms, Channel, Track, UtteranceRecord};
use crate::error::{Error, Result};

/// File-name suffix of the pre-rendered hearing-loss-simulation output.
pub const HLS_SUFFIX: &str = "_HL-output";

#[derive(Debug, Deserialize)]
struct RawTrial {
    signal: Option<String>,
    scene: Option<String>,
    listener: Option<String>,
    system: Option<String>,
    correctness: Option<f64>,
    enhanced_path: Option<String>,
    hls_path: Option<String>,
    clean_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRecord {
    /// `signal` when present, otherwise `#<index>`.
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ManifestLoad {
    pub track: Track,
    pub records: Vec<UtteranceRecord>,
    pub rejected: Vec<RejectedRecord>,
}

pub fn load_manifest(path: &Path, track: Track) -> Result<ManifestLoad> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let load = parse_manifest(&text, track).map_err(|reason| Error::Manifest {
        path: path.to_path_buf(),
        reason,
    })?;
    if load.records.is_empty() && load.rejected.is_empty() {
        log::warn!("manifest {} contains no trials", path.display());
    }
    for r in &load.rejected {
        log::warn!("rejected trial {}: {}", r.utterance_id, r.reason);
    }
    Ok(load)
}

/// Parse manifest text. An unparseable document is an `Err`; individual bad
/// trials are collected in [`ManifestLoad::rejected`].
pub fn parse_manifest(text: &str, track: Track) -> std::result::Result<ManifestLoad, String> {
    let mut load = ManifestLoad {
        track,
        records: Vec::new(),
        rejected: Vec::new(),
    };
    if text.trim().is_empty() {
        return Ok(load);
    }
    let items: Vec<Value> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    for (idx, item) in items.into_iter().enumerate() {
        let fallback_id = item
            .get("signal")
            .and_then(Value::as_str)
            .map_or_else(|| format!("#{idx}"), str::to_string);
        match convert(item, track) {
            Ok(rec) => load.records.push(rec),
            Err(reason) => load.rejected.push(RejectedRecord {
                utterance_id: fallback_id,
                reason,
            }),
        }
    }
    Ok(load)
}

fn convert(item: Value, track: Track) -> std::result::Result<UtteranceRecord, String> {
    let raw: RawTrial = serde_json::from_value(item).map_err(|e| e.to_string())?;
    let mut missing = Vec::new();
    if raw.signal.is_none() {
        missing.push("signal");
    }
    if raw.listener.is_none() {
        missing.push("listener");
    }
    if raw.system.is_none() {
        missing.push("system");
    }
    if raw.correctness.is_none() {
        missing.push("correctness");
    }
    if !missing.is_empty() {
        return Err(format!("missing field(s): {}", missing.join(", ")));
    }
    let signal = raw.signal.unwrap();
    let correctness = raw.correctness.unwrap();
    if !(0.0..=100.0).contains(&correctness) {
        return Err(format!("correctness {correctness} outside [0, 100]"));
    }
    let enhanced = raw
        .enhanced_path
        .unwrap_or_else(|| format!("{signal}.wav"));
    let hls = raw
        .hls_path
        .unwrap_or_else(|| format!("{signal}{HLS_SUFFIX}.wav"));
    let clean = raw
        .clean_path
        .or_else(|| raw.scene.as_ref().map(|s| format!("{s}_target_anechoic.wav")));
    Ok(UtteranceRecord {
        utterance_id: signal,
        listener_id: raw.listener.unwrap(),
        system_id: raw.system.unwrap(),
        track,
        enhanced_audio_ref: AudioRef(enhanced),
        hls_audio_ref: Some(AudioRef(hls)),
        clean_audio_ref: clean.map(AudioRef),
        correctness,
        audiograms: None,
    })
}

#[derive(Debug, Deserialize)]
struct RawListener {
    audiogram_cfs: Vec<f64>,
    audiogram_levels_l: Vec<f64>,
    audiogram_levels_r: Vec<f64>,
}

/// Read a listener metadata file (object keyed by listener id).
pub fn load_listeners(path: &Path) -> Result<HashMap<String, Audiograms>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: HashMap<String, RawListener> =
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    raw.into_iter()
        .map(|(id, l)| {
            let left = Audiogram::new(Channel::Left, l.audiogram_cfs.clone(), l.audiogram_levels_l)?;
            let right = Audiogram::new(Channel::Right, l.audiogram_cfs, l.audiogram_levels_r)?;
            Ok((id, Audiograms { left, right }))
        })
        .collect()
}

/// Attach audiograms by listener id; returns the ids that had none.
pub fn attach_audiograms(
    records: &mut [UtteranceRecord],
    listeners: &HashMap<String, Audiograms>,
) -> Vec<String> {
    let mut unknown = Vec::new();
    for r in records {
        match listeners.get(&r.listener_id) {
            Some(a) => r.audiograms = Some(a.clone()),
            None => unknown.push(r.listener_id.clone()),
        }
    }
    unknown.sort();
    unknown.dedup();
    unknown
}
