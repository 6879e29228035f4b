use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Track, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Uniform random selection of utterances.
    #[default]
    Uniform,
    /// Whole listeners are moved to validation until the target size is reached.
    ListenerDisjoint,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<UtteranceRecord>,
    pub validation: Vec<UtteranceRecord>,
    pub test: Vec<UtteranceRecord>,
    pub track: Track,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn with_test(mut self, test: Vec<UtteranceRecord>) -> Self {
        self.test = test;
        self
    }
}

/// Validation size: `ceil(fraction * n)`, kept within `1..n` when `n >= 2`.
///
/// A pool of 4863 gives 487 and a pool of 3580 gives 358.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    // The epsilon absorbs representation error such as 0.1 * 3580 = 358.00000000000006.
    let raw = (fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if n >= 2 {
        raw.clamp(1, n - 1)
    } else {
        raw.min(n)
    }
}

pub fn make_split(records: &[UtteranceRecord], validation_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    make_split_with(records, validation_fraction, seed, SplitMode::Uniform)
}

pub fn make_split_with(
    records: &[UtteranceRecord],
    validation_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction {validation_fraction} outside (0, 1)"
        )));
    }
    if records.is_empty() {
        return Err(Error::invalid("cannot split an empty record list"));
    }
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.utterance_id.as_str()) {
            return Err(Error::invalid(format!("duplicate utterance id {}", r.utterance_id)));
        }
    }
    let track = records[0].track;
    let target = validation_count(records.len(), validation_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let in_validation: HashSet<usize> = match mode {
        SplitMode::Uniform => {
            let mut idx: Vec<usize> = (0..records.len()).collect();
            idx.shuffle(&mut rng);
            idx.into_iter().take(target).collect()
        }
        SplitMode::ListenerDisjoint => {
            let mut listeners: Vec<&str> = records
                .iter()
                .map(|r| r.listener_id.as_str())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if listeners.len() < 2 {
                return Err(Error::invalid("listener-disjoint split needs at least two listeners"));
            }
            listeners.shuffle(&mut rng);
            let mut chosen = HashSet::new();
            let mut count = 0;
            // Never move the last listener: train must stay non-empty.
            for l in &listeners[..listeners.len() - 1] {
                if count >= target {
                    break;
                }
                chosen.insert(*l);
                count += records.iter().filter(|r| r.listener_id == *l).count();
            }
            (0..records.len())
                .filter(|&i| chosen.contains(records[i].listener_id.as_str()))
                .collect()
        }
    };

    let mut train = Vec::with_capacity(records.len() - in_validation.len());
    let mut validation = Vec::with_capacity(in_validation.len());
    for (i, r) in records.iter().enumerate() {
        if in_validation.contains(&i) {
            validation.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        validation,
        test: Vec::new(),
        track,
        seed,
    })
}
