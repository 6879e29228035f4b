use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sipred::corpus::{write_synthetic_corpus, SignalKind, SyntheticSpec, Track};
use sipred::features::{FeatureBinding, MODEL_ROOT_ENV};
use sipred::pipeline::{
    cmd_distance_study, cmd_evaluate, cmd_extract, cmd_report, cmd_train, Precision, RunConfig, CHECKPOINT_FILE,
};
use sipred::Scalar;

/// Exit status when a command finished but some utterances failed.
const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "sipred", version, about = "Non-intrusive speech intelligibility prediction")]
#[command(after_help = format!(
    "Command backends receive the model directory through the {MODEL_ROOT_ENV} environment variable."
))]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    track: Option<Track>,
    #[arg(long, global = true)]
    signal_kind: Option<SignalKind>,
    /// `SPEC` or `<backend>:FE|OL`.
    #[arg(long, global = true)]
    binding: Option<FeatureBinding>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fill the feature cache for the configured binding.
    Extract,
    /// Clean-versus-processed feature distances and their correlation with correctness.
    Distances,
    /// Train a predictor on cached features.
    Train,
    /// Score the test manifest and write the report.
    Evaluate {
        /// Defaults to `<out_dir>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Correctness histogram and per-listener means.
    Report,
    /// Write a small synthetic corpus (manifests plus audio) to a directory.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        train_trials: usize,
        #[arg(long, default_value_t = 8)]
        test_trials: usize,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(t) = cli.track {
        cfg.track = t;
    }
    if let Some(k) = cli.signal_kind {
        cfg.signal_kind = k;
    }
    if let Some(b) = &cli.binding {
        cfg.binding = b.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn extract<S: Scalar>(cfg: &RunConfig) -> Result<ExitCode> {
    let s = cmd_extract::<S>(cfg)?;
    println!("stored {}, skipped {}, failed {}", s.stored, s.skipped, s.failures.len());
    for f in &s.failures {
        println!("failed {}: {}", f.utterance_id, f.reason);
    }
    Ok(if s.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(PARTIAL_FAILURE)
    })
}

fn distances<S: Scalar>(cfg: &RunConfig) -> Result<ExitCode> {
    let out = cmd_distance_study::<S>(cfg)?;
    for r in &out.correlations {
        let f = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:<8} {:<5} {:<8} spearman {:>9} pearson {:>9} n {}",
            r.representation,
            r.measure.to_string(),
            r.test_signal_kind,
            f(r.spearman),
            f(r.pearson),
            r.n
        );
    }
    for s in &out.study.skipped {
        println!("skipped {}: {}", s.utterance_id, s.reason);
    }
    println!("wrote {} and {}", out.distance_csv.display(), out.correlation_csv.display());
    Ok(if out.study.skipped.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(PARTIAL_FAILURE)
    })
}

fn train<S: Scalar>(cfg: &RunConfig) -> Result<ExitCode> {
    let out = cmd_train::<S>(cfg)?;
    let best = out.log.best().context("training logged no epochs")?;
    println!(
        "best epoch {} of {}: validation RMSE {:.3}",
        out.log.best_epoch,
        out.log.records.len(),
        best.validation_rmse
    );
    println!("checkpoint {}", out.checkpoint.display());
    Ok(ExitCode::SUCCESS)
}

fn evaluate<S: Scalar>(cfg: &RunConfig, checkpoint: &Path) -> Result<ExitCode> {
    let out = cmd_evaluate::<S>(cfg, checkpoint)?;
    let m = &out.summary;
    let f = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.3}"));
    println!(
        "{}: RMSE {:.3}  Var {:.3}  Spearman {}  Pearson {}  n {}",
        m.model_name,
        m.rmse,
        m.error_var,
        f(m.spearman),
        f(m.pearson),
        m.n
    );
    for w in &out.bundle.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", out.bundle.metrics_csv.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Command::Synth {
        dir,
        train_trials,
        test_trials,
        corpus_seed,
    } = &cli.command
    {
        let spec = SyntheticSpec {
            train_trials: *train_trials,
            test_trials: *test_trials,
            seed: *corpus_seed,
            ..Default::default()
        };
        let c = write_synthetic_corpus(dir, &spec)?;
        println!("wrote {} and {}", c.manifest.display(), c.test_manifest.display());
        return Ok(ExitCode::SUCCESS);
    }

    let cfg = load_config(cli)?;
    macro_rules! typed {
        ($f:ident $(, $arg:expr)*) => {
            match cfg.precision {
                Precision::F32 => $f::<f32>(&cfg $(, $arg)*),
                Precision::F64 => $f::<f64>(&cfg $(, $arg)*),
            }
        };
    }
    match &cli.command {
        Command::Extract => typed!(extract),
        Command::Distances => typed!(distances),
        Command::Train => typed!(train),
        Command::Evaluate { checkpoint } => {
            let ckpt = checkpoint
                .clone()
                .unwrap_or_else(|| cfg.paths.out_dir.join(CHECKPOINT_FILE));
            typed!(evaluate, &ckpt)
        }
        Command::Report => {
            for p in cmd_report(&cfg)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
