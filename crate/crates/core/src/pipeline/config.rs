use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{SignalKind, SplitMode, Track};
use crate::error::{Error, Result};
use crate::features::{
    register_mock_backend, registry_entry, BackendDescriptor, ExternalBackend, FeatureBackend, FeatureBinding,
    FeatureExtractor, SpectrogramConfig, MODEL_ROOT_ENV,
};
use crate::scalar::Scalar;
use crate::training::{AdamParams, Loss, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPaths {
    /// Training manifest.
    pub manifest: PathBuf,
    /// Held-out manifest scored by `evaluate`.
    #[serde(default)]
    pub test_manifest: Option<PathBuf>,
    pub audio_root: PathBuf,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub loss: Loss,
    pub adam: AdamParams,
    pub record_train_rmse: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::new(FeatureBinding::Spectrogram, SignalKind::Enhanced);
        Self {
            max_epochs: d.max_epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            patience: d.patience,
            loss: d.loss,
            adam: d.adam,
            record_train_rmse: d.record_train_rmse,
        }
    }
}

/// A speech-representation backend available to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendSpec {
    /// Seeded stand-in. Dimensions default to the registry entry for `id`.
    Mock {
        id: String,
        #[serde(default)]
        fe_dim: Option<usize>,
        #[serde(default)]
        ol_dim: Option<usize>,
        #[serde(default)]
        hop: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    /// Out-of-process model. The descriptor defaults to the registry entry for `id`.
    Command {
        id: String,
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        descriptor: Option<BackendDescriptor>,
    },
}

impl BackendSpec {
    pub fn id(&self) -> &str {
        match self {
            BackendSpec::Mock { id, .. } | BackendSpec::Command { id, .. } => id,
        }
    }

    pub fn instantiate<S: Scalar>(&self) -> Result<Arc<dyn FeatureBackend<S>>> {
        match self {
            BackendSpec::Mock {
                id,
                fe_dim,
                ol_dim,
                hop,
                seed,
            } => {
                let known = registry_entry(id);
                let pick = |v: Option<usize>, f: fn(&BackendDescriptor) -> usize, what: &str| {
                    v.or(known.as_ref().map(f))
                        .ok_or_else(|| Error::Config(format!("mock backend {id}: {what} required")))
                };
                let fe = pick(*fe_dim, |d| d.fe_dim, "fe_dim")?;
                let ol = pick(*ol_dim, |d| d.ol_dim, "ol_dim")?;
                let hop = pick(*hop, |d| d.frame_hop, "hop")?;
                Ok(Arc::new(register_mock_backend::<S>(*seed, fe, ol, hop)?.with_id(id.clone())))
            }
            BackendSpec::Command {
                id,
                program,
                args,
                descriptor,
            } => {
                let mut d = descriptor
                    .clone()
                    .or_else(|| registry_entry(id))
                    .ok_or_else(|| Error::Config(format!("command backend {id}: descriptor required")))?;
                d.backend_id = id.clone();
                let root = std::env::var_os(MODEL_ROOT_ENV).map(PathBuf::from);
                Ok(Arc::new(ExternalBackend::new(d, program.clone(), args.clone(), root)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

fn default_fraction() -> f64 {
    0.1
}

fn default_kinds() -> Vec<SignalKind> {
    vec![SignalKind::Enhanced, SignalKind::Hls]
}

/// Declarative description of a run. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub track: Track,
    pub signal_kind: SignalKind,
    pub binding: FeatureBinding,
    pub paths: RunPaths,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    #[serde(default)]
    pub spectrogram: SpectrogramConfig,
    #[serde(default = "default_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub split_mode: SplitMode,
    /// Signals compared against the clean reference by `distances`.
    #[serde(default = "default_kinds")]
    pub distance_signal_kinds: Vec<SignalKind>,
    #[serde(default)]
    pub precision: Precision,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    /// Label for the metrics table. Defaults to the binding and signal kind.
    #[serde(default)]
    pub model_name: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.manifest);
        fix(&mut paths.audio_root);
        fix(&mut paths.cache_dir);
        fix(&mut paths.out_dir);
        if let Some(t) = &mut paths.test_manifest {
            fix(t);
        }
        for b in &mut self.backends {
            if let BackendSpec::Command { program, .. } = b {
                if program.components().count() > 1 {
                    fix(program);
                }
            }
        }
    }

    /// Checks everything that can be checked without touching audio.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist(&self.paths.manifest, "manifest")?;
        must_exist(&self.paths.audio_root, "audio_root")?;
        if let Some(t) = &self.paths.test_manifest {
            must_exist(t, "test_manifest")?;
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        if self.distance_signal_kinds.is_empty() {
            return Err(Error::Config("distance_signal_kinds must not be empty".into()));
        }
        let mut ids: Vec<&str> = self.backends.iter().map(BackendSpec::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("backend ids must be unique".into()));
        }
        if let Some(id) = self.binding.backend_id() {
            if !ids.contains(&id) {
                return Err(Error::Config(format!("binding {} names an unconfigured backend", self.binding)));
            }
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            seed: self.seed,
            loss: t.loss,
            signal_kind: self.signal_kind,
            binding: self.binding.clone(),
            adam: t.adam,
            record_train_rmse: t.record_train_rmse,
            target_train_rmse: None,
        }
    }

    pub fn backend_spec(&self, id: &str) -> Option<&BackendSpec> {
        self.backends.iter().find(|b| b.id() == id)
    }

    pub fn extractor<S: Scalar>(&self) -> Result<FeatureExtractor<S>> {
        match &self.binding {
            FeatureBinding::Spectrogram => Ok(FeatureExtractor::spectrogram(self.spectrogram.clone())),
            FeatureBinding::Backend { backend_id, kind } => {
                let spec = self
                    .backend_spec(backend_id)
                    .ok_or_else(|| Error::Config(format!("backend {backend_id} is not configured")))?;
                FeatureExtractor::backend(spec.instantiate()?, *kind)
            }
        }
    }

    pub fn model_name(&self) -> String {
        self.model_name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.binding, self.signal_kind))
    }
}
