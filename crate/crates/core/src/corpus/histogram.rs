use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::UtteranceRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListenerMean {
    pub listener_id: String,
    pub mean_correctness: f64,
    pub n: usize,
}

/// Correctness distribution plus per-listener means, ordered by listener id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessHistogram {
    pub bins: Vec<HistogramBin>,
    pub listener_means: Vec<ListenerMean>,
    pub overall_mean: f64,
}

/// Equal-width bins over [0, 100]; the last bin is closed so 100 lands in it.
pub fn correctness_histogram(records: &[UtteranceRecord], bin_count: usize) -> Result<CorrectnessHistogram> {
    if bin_count < 1 {
        return Err(Error::invalid("bin_count must be at least 1"));
    }
    if records.is_empty() {
        return Err(Error::invalid("histogram of an empty record list"));
    }
    let width = 100.0 / bin_count as f64;
    let mut bins: Vec<HistogramBin> = (0..bin_count)
        .map(|b| HistogramBin {
            low: b as f64 * width,
            high: if b + 1 == bin_count { 100.0 } else { (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    let mut per_listener: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let b = ((r.correctness / width).floor() as usize).min(bin_count - 1);
        bins[b].count += 1;
        let e = per_listener.entry(&r.listener_id).or_default();
        e.0 += r.correctness;
        e.1 += 1;
    }
    let overall_mean = records.iter().map(|r| r.correctness).sum::<f64>() / records.len() as f64;
    Ok(CorrectnessHistogram {
        bins,
        listener_means: per_listener
            .into_iter()
            .map(|(id, (sum, n))| ListenerMean {
                listener_id: id.to_string(),
                mean_correctness: sum / n as f64,
                n,
            })
            .collect(),
        overall_mean,
    })
}

impl CorrectnessHistogram {
    pub fn modal_bin(&self) -> &HistogramBin {
        // Ties resolve to the highest bin.
        self.bins
            .iter()
            .rev()
            .max_by_key(|b| b.count)
            .expect("at least one bin")
    }

    /// `bin_low,bin_high,count`.
    pub fn write_bins_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("bin_low,bin_high,count\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{}\n", b.low, b.high, b.count));
        }
        write_file(path, out.as_bytes())
    }

    /// `listener_id,mean_correctness,n`.
    pub fn write_listener_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("listener_id,mean_correctness,n\n");
        for l in &self.listener_means {
            out.push_str(&format!("{},{:.6},{}\n", l.listener_id, l.mean_correctness, l.n));
        }
        write_file(path, out.as_bytes())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
