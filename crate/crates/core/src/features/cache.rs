//! On-disk feature cache.
//!
//! Each entry is a pair of files named by the entry key: `<key>.feat` holding
//! the tensor and `<key>.json` holding [`CacheEntryMeta`]. The key is the
//! SHA-256 of the audio file bytes, the extractor fingerprint and the channel,
//! so a change to any of them produces a miss.
//!
//! `.feat` byte layout (integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SIPFEAT1"
//! 8       4     u32 format version (1)
//! 12      4     u32 dtype code (0 = f32, 1 = f64)
//! 16      8     u64 frames T
//! 24      8     u64 feature dimension F
//! 32      T*F*w values, frame-major, w = 4 or 8
//! ```

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{FeatureKind, FeatureMatrix};
use crate::corpus::Channel;
use crate::error::{Error, Result};
use crate::scalar::{decode_le, Dtype, Scalar};
use crate::tensor::Matrix;

const MAGIC: &[u8; 8] = b"SIPFEAT1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

pub fn write_feature_file<S: Scalar>(path: &Path, values: &Matrix<S>) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + values.as_slice().len() * S::DTYPE.width());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&S::DTYPE.code().to_le_bytes());
    buf.extend_from_slice(&(values.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(values.cols() as u64).to_le_bytes());
    for &v in values.as_slice() {
        v.write_le(&mut buf);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Values are converted to `S` if the file was written at another width.
pub fn read_feature_file<S: Scalar>(path: &Path) -> Result<Matrix<S>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::Cache(format!("{}: {why}", path.display()));
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not a feature file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != VERSION {
        return Err(bad("unsupported version"));
    }
    let dtype = Dtype::from_code(u32_at(12)).ok_or_else(|| bad("unknown dtype"))?;
    let rows = u64_at(16) as usize;
    let cols = u64_at(24) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * dtype.width() {
        return Err(bad("payload length does not match header"));
    }
    Ok(Matrix::from_vec(rows, cols, decode_le(body, dtype)))
}

/// Sidecar record stored next to each tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntryMeta {
    pub key: String,
    pub utterance_id: String,
    pub channel: Channel,
    pub binding: String,
    pub backend_id: String,
    pub kind: FeatureKind,
    pub hop_samples: usize,
    pub sample_rate: u32,
    pub frames: usize,
    pub dim: usize,
    pub dtype: Dtype,
    pub frame_time_offset_s: f64,
    pub frame_time_step_s: f64,
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(audio_bytes: &[u8], fingerprint: &str, channel: Channel) -> String {
        let mut h = Sha256::new();
        h.update((audio_bytes.len() as u64).to_le_bytes());
        h.update(audio_bytes);
        h.update(fingerprint.as_bytes());
        h.update([0u8]);
        h.update(channel.as_str().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (
            self.dir.join(format!("{key}.feat")),
            self.dir.join(format!("{key}.json")),
        )
    }

    fn read_meta(&self, key: &str) -> Option<CacheEntryMeta> {
        let (_, meta) = self.paths(key);
        let text = std::fs::read_to_string(meta).ok()?;
        serde_json::from_str::<CacheEntryMeta>(&text)
            .ok()
            .filter(|m| m.key == key)
    }

    /// True when both files exist, the sidecar parses and the tensor header agrees with it.
    pub fn is_valid(&self, key: &str) -> bool {
        let Some(meta) = self.read_meta(key) else {
            return false;
        };
        let (feat, _) = self.paths(key);
        let Ok(len) = std::fs::metadata(&feat).map(|m| m.len() as usize) else {
            return false;
        };
        len == HEADER_LEN + meta.frames * meta.dim * meta.dtype.width()
    }

    pub fn store<S: Scalar>(&self, meta: &CacheEntryMeta, fm: &FeatureMatrix<S>) -> Result<()> {
        let (feat, side) = self.paths(&meta.key);
        let tmp = feat.with_extension("feat.tmp");
        write_feature_file(&tmp, fm.values())?;
        std::fs::rename(&tmp, &feat).map_err(|e| Error::io(&feat, e))?;
        let json = serde_json::to_vec_pretty(meta).expect("metadata serialises");
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn load<S: Scalar>(&self, key: &str) -> Result<Option<FeatureMatrix<S>>> {
        if !self.is_valid(key) {
            return Ok(None);
        }
        let meta = self.read_meta(key).expect("validated above");
        let (feat, _) = self.paths(key);
        let values = read_feature_file::<S>(&feat)?;
        FeatureMatrix::with_uniform_times(
            values,
            meta.frame_time_offset_s,
            meta.frame_time_step_s,
            meta.kind,
            meta.backend_id,
            meta.channel,
        )
        .map(Some)
    }

    /// Number of complete entries on disk.
    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .filter(|e| {
                        e.path()
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .is_some_and(|k| self.is_valid(k))
                    })
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
