//! Real speech-representation models run out of process.
//!
//! A plug-in is any executable invoked as
//!
//! ```text
//! <program> [args...] --input <mono.wav> --stage <fe|ol> --output <out.feat>
//! ```
//!
//! It must write a `.feat` tensor (see the cache module) with the declared
//! dimension. The model storage root is forwarded in `SIPRED_MODEL_ROOT`.

use std::io::ErrorKind;
use std::path::PathBuf;
use std::process::Command;

use super::backend::{BackendDescriptor, FeatureBackend};
use super::cache::read_feature_file;
use crate::corpus::{write_wav_f32, Waveform};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Environment variable naming the directory that holds pretrained model files.
pub const MODEL_ROOT_ENV: &str = "SIPRED_MODEL_ROOT";

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    descriptor: BackendDescriptor,
    program: PathBuf,
    args: Vec<String>,
    model_root: Option<PathBuf>,
}

impl ExternalBackend {
    pub fn new(
        descriptor: BackendDescriptor,
        program: impl Into<PathBuf>,
        args: Vec<String>,
        model_root: Option<PathBuf>,
    ) -> Self {
        Self {
            descriptor,
            program: program.into(),
            args,
            model_root,
        }
    }

    fn run<S: Scalar>(&self, samples: &[S], stage: &str) -> Result<Matrix<S>> {
        let id = &self.descriptor.backend_id;
        let failed = |detail: String| Error::BackendLoadFailed {
            backend_id: id.clone(),
            detail,
        };
        let dir = tempfile::tempdir().map_err(|e| failed(e.to_string()))?;
        let input = dir.path().join("input.wav");
        let output = dir.path().join("output.feat");
        let w = Waveform::mono(samples.to_vec(), self.descriptor.expected_sample_rate)?;
        write_wav_f32(&input, &w)?;

        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .arg("--input")
            .arg(&input)
            .arg("--stage")
            .arg(stage)
            .arg("--output")
            .arg(&output);
        if let Some(root) = &self.model_root {
            cmd.env(MODEL_ROOT_ENV, root);
        }
        let out = cmd.output().map_err(|e| match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied => Error::BackendNotInstalled {
                backend_id: id.clone(),
                detail: format!("cannot run {}: {e}", self.program.display()),
            },
            _ => failed(e.to_string()),
        })?;
        if !out.status.success() {
            return Err(failed(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        read_feature_file::<S>(&output).map_err(|e| failed(e.to_string()))
    }
}

impl<S: Scalar> FeatureBackend<S> for ExternalBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn encode(&self, samples: &[S]) -> Result<Matrix<S>> {
        self.run(samples, "fe")
    }

    fn contextualize(&self, samples: &[S]) -> Result<Matrix<S>> {
        self.run(samples, "ol")
    }

    fn fingerprint(&self) -> String {
        format!(
            "{}|{}|{}",
            serde_json::to_string(&self.descriptor).unwrap_or_default(),
            self.program.display(),
            self.args.join(" ")
        )
    }
}
