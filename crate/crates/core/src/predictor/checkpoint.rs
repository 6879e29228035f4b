//! Checkpoint file format.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SIPCKPT1"
//! 8       4     u32 format version
//! 12      4     u32 header length H
//! 16      H     UTF-8 JSON [`CheckpointHeader`]
//! 16+H    N*w   parameters, little-endian, in layout order
//! ```
//!
//! Parameters are stored at the width they were trained in and converted on
//! load if the reader uses the other width.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ParamLayout, PredictorModel, Segment};
use crate::error::{Error, Result};
use crate::features::FeatureBinding;
use crate::scalar::{decode_le, Dtype, Scalar};

const MAGIC: &[u8; 8] = b"SIPCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub binding: FeatureBinding,
    pub dtype: Dtype,
    pub parameter_count: usize,
    pub init_seed: u64,
    pub train_seed: Option<u64>,
    pub segments: Vec<Segment>,
}

pub fn save_checkpoint<S: Scalar>(model: &PredictorModel<S>, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        config: model.config.clone(),
        binding: model.binding.clone(),
        dtype: S::DTYPE,
        parameter_count: model.params.len(),
        init_seed: model.init_seed,
        train_seed: model.train_seed,
        segments: model.layout.segments.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + model.params.len() * S::DTYPE.width());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for &p in &model.params {
        p.write_le(&mut buf);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<PredictorModel<S>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |why: String| Error::Checkpoint(format!("{}: {why}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| bad(format!("header: {e}")))?;
    let layout = ParamLayout::new(&header.config);
    if layout.segments != header.segments || layout.total != header.parameter_count {
        return Err(bad("parameter layout does not match the model configuration".into()));
    }
    let data = &bytes[16 + hlen..];
    if data.len() != header.parameter_count * header.dtype.width() {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            header.parameter_count * header.dtype.width(),
            data.len()
        )));
    }
    let params = decode_le::<S>(data, header.dtype);
    PredictorModel::from_parts(
        header.config,
        params,
        header.binding,
        header.init_seed,
        header.train_seed,
    )
    .map_err(|e| bad(e.to_string()))
}
