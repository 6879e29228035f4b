use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::corpus::{Channel, SignalKind, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::{CacheEntryMeta, FeatureCache, FeatureExtractor, FeatureMatrix};
use crate::scalar::Scalar;
use crate::training::FeatureSource;

/// Cache keys for every channel of one audio file, left first.
pub(crate) fn channel_keys(bytes: &[u8], path: &Path, fingerprint: &str) -> Result<Vec<(Channel, String)>> {
    let channels = hound::WavReader::new(Cursor::new(bytes))
        .map_err(|e| Error::Audio {
            locator: path.display().to_string(),
            reason: e.to_string(),
        })?
        .spec()
        .channels;
    let labels: &[Channel] = match channels {
        1 => &[Channel::Left],
        2 => &[Channel::Left, Channel::Right],
        n => {
            return Err(Error::Audio {
                locator: path.display().to_string(),
                reason: format!("{n} channels; expected 1 or 2"),
            })
        }
    };
    Ok(labels
        .iter()
        .map(|&c| (c, FeatureCache::key(bytes, fingerprint, c)))
        .collect())
}

pub(crate) fn read_audio(root: &Path, record: &UtteranceRecord, kind: SignalKind) -> Result<(PathBuf, Vec<u8>)> {
    let aref = record
        .audio_ref(kind)
        .ok_or_else(|| Error::invalid(format!("no {kind} signal")))?;
    let path = aref.resolve(root);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, bytes))
}

pub(crate) fn entry_meta<S: Scalar>(
    key: String,
    record: &UtteranceRecord,
    extractor: &FeatureExtractor<S>,
    fm: &FeatureMatrix<S>,
) -> CacheEntryMeta {
    let times = fm.frame_times();
    let rate = extractor.expected_sample_rate();
    let step = extractor.frame_hop() as f64 / rate as f64;
    CacheEntryMeta {
        key,
        utterance_id: record.utterance_id.clone(),
        channel: fm.source_channel(),
        binding: extractor.binding().to_string(),
        backend_id: fm.backend_id().to_string(),
        kind: fm.kind(),
        hop_samples: extractor.frame_hop(),
        sample_rate: rate,
        frames: fm.num_frames(),
        dim: fm.dim(),
        dtype: S::DTYPE,
        frame_time_offset_s: times[0],
        frame_time_step_s: if times.len() > 1 { times[1] - times[0] } else { step },
    }
}

/// Reads features that `extract` stored for an extractor.
pub struct CachedFeatures {
    cache: FeatureCache,
    audio_root: PathBuf,
    fingerprint: String,
}

impl CachedFeatures {
    pub fn new<S: Scalar>(cache: FeatureCache, audio_root: impl Into<PathBuf>, extractor: &FeatureExtractor<S>) -> Self {
        Self {
            cache,
            audio_root: audio_root.into(),
            fingerprint: extractor.fingerprint(),
        }
    }
}

impl<S: Scalar> FeatureSource<S> for CachedFeatures {
    fn channel_features(&self, record: &UtteranceRecord, kind: SignalKind) -> Result<Vec<FeatureMatrix<S>>> {
        let (path, bytes) = read_audio(&self.audio_root, record, kind)?;
        channel_keys(&bytes, &path, &self.fingerprint)?
            .into_iter()
            .map(|(ch, key)| {
                self.cache
                    .load::<S>(&key)?
                    .ok_or_else(|| Error::MissingFeatures(format!("{} ({ch})", record.utterance_id)))
            })
            .collect()
    }
}
