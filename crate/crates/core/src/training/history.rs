use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::corpus::UtteranceRecord;
use crate::error::{Error, Result};

pub const TRAIN_LOG_CSV: &str = "train_log.csv";
pub const RUN_MANIFEST_JSON: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean channel-summed loss over the epoch's training utterances.
    pub train_loss: f64,
    /// Better-ear RMSE, 0-100 scale.
    pub validation_rmse: f64,
    pub train_rmse: Option<f64>,
    pub wall_time_s: f64,
}

/// Content hashes of the utterance ids and labels used for a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDigest {
    pub train_sha256: String,
    pub validation_sha256: String,
    pub n_train: usize,
    pub n_validation: usize,
}

fn digest(records: &[UtteranceRecord]) -> String {
    let mut lines: Vec<String> = records
        .iter()
        .map(|r| format!("{}\t{}\t{}\n", r.utterance_id, r.correctness, r.enhanced_audio_ref))
        .collect();
    lines.sort();
    let mut h = Sha256::new();
    for l in &lines {
        h.update(l.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl DatasetDigest {
    pub fn new(train: &[UtteranceRecord], validation: &[UtteranceRecord]) -> Self {
        Self {
            train_sha256: digest(train),
            validation_sha256: digest(validation),
            n_train: train.len(),
            n_validation: validation.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: TrainConfig,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub parameter_count: usize,
    pub dataset: DatasetDigest,
    pub final_checkpoint: Option<PathBuf>,
}

impl TrainLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    code_version: String,
    config: &'a TrainConfig,
    dataset: &'a DatasetDigest,
    parameter_count: usize,
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    final_checkpoint: &'a Option<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Writes `train_log.csv` and `run_manifest.json` into `dir`.
pub fn write_train_log(log: &TrainLog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(TRAIN_LOG_CSV);
    let mut csv = String::from("epoch,train_loss,validation_rmse,train_rmse,wall_time_s\n");
    for r in &log.records {
        csv.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            r.epoch,
            r.train_loss,
            r.validation_rmse,
            fmt_opt(r.train_rmse),
            r.wall_time_s
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let manifest = RunManifest {
        code_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config: &log.config,
        dataset: &log.dataset,
        parameter_count: log.parameter_count,
        best_epoch: log.best_epoch,
        epochs_run: log.records.len(),
        stopped_early: log.stopped_early,
        final_checkpoint: &log.final_checkpoint,
    };
    let json_path = dir.join(RUN_MANIFEST_JSON);
    let mut f = std::fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| Error::Config(e.to_string()))?;
    f.write_all(b"\n").map_err(|e| Error::io(&json_path, e))
}
