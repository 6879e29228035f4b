//! Seeded toy corpus on disk, for smoke tests and demos.
//!
//! Each trial has a clean harmonic signal, a stereo "enhanced" version with
//! additive noise and a stereo "hearing-loss" version that is low-passed and
//! attenuated. Correctness is a logistic function of the trial's SNR, so the
//! labels are learnable from the audio.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{write_wav_f32, Waveform, HLS_SUFFIX};
use crate::error::{Error, Result};

pub const SYNTHETIC_RATE: u32 = 16000;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub train_trials: usize,
    pub test_trials: usize,
    /// Samples per file at 16 kHz.
    pub samples: usize,
    pub listeners: usize,
    pub systems: usize,
    /// Systems that only appear in the test manifest.
    pub unseen_test_systems: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            train_trials: 24,
            test_trials: 8,
            samples: 8000,
            listeners: 4,
            systems: 3,
            unseen_test_systems: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub audio_root: PathBuf,
}

fn trial(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f32>, [Vec<f32>; 2], [Vec<f32>; 2], f64) {
    let snr_db: f64 = rng.gen_range(-10.0..20.0);
    let f0: f64 = rng.gen_range(110.0..260.0);
    let rate = SYNTHETIC_RATE as f64;
    let env_hz: f64 = rng.gen_range(2.0..6.0);
    let clean: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let env = 0.6 + 0.4 * (2.0 * std::f64::consts::PI * env_hz * t).sin();
            let s: f64 = (1..=6)
                .map(|h| (2.0 * std::f64::consts::PI * f0 * h as f64 * t).sin() / h as f64)
                .sum();
            0.25 * env * s
        })
        .collect();
    let power = clean.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let noise_rms = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut noisy = || -> Vec<f64> {
        clean
            .iter()
            .map(|&c| c + noise_rms * 3f64.sqrt() * rng.gen_range(-1.0..1.0))
            .collect()
    };
    let enhanced = [noisy(), noisy()];
    let hls = enhanced.clone().map(|ch| {
        let mut y = 0.0;
        ch.iter()
            .map(|&x| {
                y += 0.3 * (x - y);
                (0.5 * y) as f32
            })
            .collect::<Vec<f32>>()
    });
    let to32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
    let correctness = (100.0 / (1.0 + (-(snr_db - 5.0) / 4.0).exp())).round();
    (to32(&clean), [to32(&enhanced[0]), to32(&enhanced[1])], hls, correctness)
}

fn write_stereo(path: &Path, ch: [Vec<f32>; 2]) -> Result<()> {
    let [l, r] = ch;
    write_wav_f32(path, &Waveform::stereo(l, r, SYNTHETIC_RATE)?)
}

/// Writes `train.json`, `test.json` and an `audio/` directory under `dir`.
pub fn write_synthetic_corpus(dir: &Path, spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.listeners == 0 || spec.systems == 0 || spec.samples == 0 {
        return Err(Error::invalid("synthetic corpus needs listeners, systems and samples"));
    }
    let audio_root = dir.join("audio");
    std::fs::create_dir_all(&audio_root).map_err(|e| Error::io(&audio_root, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut write_set = |name: &str, count: usize, offset: usize, test: bool| -> Result<PathBuf> {
        let mut trials = Vec::with_capacity(count);
        for k in 0..count {
            let i = offset + k;
            let system = if test && k < spec.unseen_test_systems {
                format!("E{:03}", spec.systems + k)
            } else {
                format!("E{:03}", i % spec.systems)
            };
            let listener = format!("L{:04}", i % spec.listeners);
            let scene = format!("S{i:05}");
            let signal = format!("{scene}_{listener}_{system}");
            let (clean, enhanced, hls, correctness) = trial(&mut rng, spec.samples);
            write_wav_f32(
                &audio_root.join(format!("{scene}_target_anechoic.wav")),
                &Waveform::mono(clean, SYNTHETIC_RATE)?,
            )?;
            write_stereo(&audio_root.join(format!("{signal}.wav")), enhanced)?;
            write_stereo(&audio_root.join(format!("{signal}{HLS_SUFFIX}.wav")), hls)?;
            trials.push(json!({
                "scene": scene,
                "listener": listener,
                "system": system,
                "signal": signal,
                "correctness": correctness,
            }));
        }
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&trials).expect("json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let manifest = write_set("train.json", spec.train_trials, 0, false)?;
    let test_manifest = write_set("test.json", spec.test_trials, spec.train_trials, true)?;
    Ok(SyntheticCorpus {
        manifest,
        test_manifest,
        audio_root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_manifest, read_wav, Track};

    #[test]
    fn corpus_is_readable_and_seeded() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            train_trials: 5,
            test_trials: 2,
            samples: 1600,
            ..Default::default()
        };
        let ca = write_synthetic_corpus(a.path(), &spec).unwrap();
        let cb = write_synthetic_corpus(b.path(), &spec).unwrap();
        let train = load_manifest(&ca.manifest, Track::Closed).unwrap();
        assert_eq!(train.records.len(), 5);
        assert!(train.rejected.is_empty());
        let r = &train.records[0];
        let w = read_wav::<f32>(&r.enhanced_audio_ref.resolve(&ca.audio_root)).unwrap();
        assert_eq!((w.num_channels(), w.len()), (2, 1600));
        assert!(r.clean_audio_ref.as_ref().unwrap().resolve(&ca.audio_root).exists());
        assert!(r.hls_audio_ref.as_ref().unwrap().resolve(&ca.audio_root).exists());
        assert_eq!(
            std::fs::read(&ca.manifest).unwrap(),
            std::fs::read(&cb.manifest).unwrap()
        );
        let test = load_manifest(&ca.test_manifest, Track::Closed).unwrap();
        assert_eq!(test.records[0].system_id, "E003");
    }
}
