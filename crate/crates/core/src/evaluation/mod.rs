//! Metrics on the 0-100 correctness scale, per-group breakdowns and static reports.

mod svg;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorrectnessHistogram, UtteranceRecord};
use crate::error::{Error, Result};
use crate::predictor::Prediction;
use crate::stats::{pearson, spearman};

pub const METRICS_CSV: &str = "metrics.csv";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const HISTOGRAM_SVG: &str = "correctness_histogram.svg";

/// What the `var` column holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarDefinition {
    /// Population variance of the per-utterance squared error, both sides on 0-1.
    #[default]
    SquaredErrorUnit,
    /// Population variance of the signed error on 0-100.
    ErrorPercent,
}

impl VarDefinition {
    pub fn describe(self) -> &'static str {
        match self {
            VarDefinition::SquaredErrorUnit => "variance of per-utterance squared error, 0-1 scale",
            VarDefinition::ErrorPercent => "variance of per-utterance error, 0-100 scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub model_name: String,
    /// Percentage points.
    pub rmse: f64,
    pub error_var: f64,
    pub var_definition: VarDefinition,
    /// `None` when a side is constant.
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub n: usize,
    pub notes: Vec<String>,
}

/// Predicted and true correctness (0-100) paired by utterance id, in prediction order.
pub fn pair_up(predictions: &[Prediction], records: &[UtteranceRecord]) -> Result<Vec<(f64, f64, usize)>> {
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.utterance_id.as_str(), i))
        .collect();
    let mut seen = BTreeSet::new();
    let mut unmatched = Vec::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for p in predictions {
        if !seen.insert(p.utterance_id.as_str()) {
            return Err(Error::invalid(format!("duplicate prediction for {}", p.utterance_id)));
        }
        match index.get(p.utterance_id.as_str()) {
            Some(&i) => pairs.push((100.0 * p.i_hat, records[i].correctness, i)),
            None => unmatched.push(p.utterance_id.clone()),
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedPredictions(unmatched));
    }
    Ok(pairs)
}

pub fn score(predictions: &[Prediction], records: &[UtteranceRecord]) -> Result<MetricSummary> {
    score_with(predictions, records, "model", VarDefinition::default())
}

pub fn score_with(
    predictions: &[Prediction],
    records: &[UtteranceRecord],
    model_name: &str,
    var_definition: VarDefinition,
) -> Result<MetricSummary> {
    let pairs = pair_up(predictions, records)?;
    let n = pairs.len();
    if n < 2 {
        return Err(Error::invalid(format!("scoring needs at least 2 utterances, got {n}")));
    }
    let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let truth: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let err: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| p - t).collect();
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let samples: Vec<f64> = match var_definition {
        VarDefinition::SquaredErrorUnit => err.iter().map(|e| (e / 100.0).powi(2)).collect(),
        VarDefinition::ErrorPercent => err.clone(),
    };
    let m = samples.iter().sum::<f64>() / n as f64;
    let error_var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / n as f64;

    let mut notes = Vec::new();
    let mut corr = |name: &str, r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(why)) => {
            notes.push(format!("{name} undefined: {why}"));
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let spearman = corr("spearman", spearman(&pred, &truth))?;
    let pearson = corr("pearson", pearson(&pred, &truth))?;
    Ok(MetricSummary {
        model_name: model_name.to_string(),
        rmse,
        error_var,
        var_definition,
        spearman,
        pearson,
        n,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    System,
    Listener,
}

impl GroupKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKind::System => "system",
            GroupKind::Listener => "listener",
        }
    }

    pub fn of(self, r: &UtteranceRecord) -> &str {
        match self {
            GroupKind::System => &r.system_id,
            GroupKind::Listener => &r.listener_id,
        }
    }

    /// Distinct group ids present in `records`.
    pub fn ids(self, records: &[UtteranceRecord]) -> BTreeSet<String> {
        records.iter().map(|r| self.of(r).to_string()).collect()
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group_id: String,
    pub mean_pred: f64,
    pub mean_true: f64,
    pub n: usize,
    pub unseen: bool,
}

/// Rows ordered by descending mean true correctness, ties by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBreakdown {
    pub group_kind: GroupKind,
    pub rows: Vec<GroupRow>,
}

pub fn breakdown(
    predictions: &[Prediction],
    records: &[UtteranceRecord],
    group_kind: GroupKind,
    training_groups: &BTreeSet<String>,
) -> Result<GroupBreakdown> {
    let pairs = pair_up(predictions, records)?;
    if pairs.is_empty() {
        return Err(Error::invalid("breakdown of an empty prediction set"));
    }
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for &(p, t, i) in &pairs {
        let e = acc.entry(group_kind.of(&records[i])).or_default();
        e.0 += p;
        e.1 += t;
        e.2 += 1;
    }
    let mut rows: Vec<GroupRow> = acc
        .into_iter()
        .map(|(id, (sp, st, n))| GroupRow {
            group_id: id.to_string(),
            mean_pred: sp / n as f64,
            mean_true: st / n as f64,
            n,
            unseen: !training_groups.contains(id),
        })
        .collect();
    rows.sort_by(|a, b| b.mean_true.total_cmp(&a.mean_true).then_with(|| a.group_id.cmp(&b.group_id)));
    Ok(GroupBreakdown { group_kind, rows })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.6}"))
}

pub fn metrics_csv(summaries: &[MetricSummary]) -> String {
    let mut s = String::from("model_name,rmse,var,spearman,pearson,n\n");
    for m in summaries {
        s.push_str(&format!(
            "{},{:.6},{:.6},{},{},{}\n",
            m.model_name,
            m.rmse,
            m.error_var,
            fmt_metric(m.spearman),
            fmt_metric(m.pearson),
            m.n
        ));
    }
    s
}

pub fn breakdown_csv(breakdowns: &[GroupBreakdown]) -> String {
    let mut s = String::from("group_kind,group_id,mean_pred,mean_true,n,unseen\n");
    for b in breakdowns {
        for r in &b.rows {
            s.push_str(&format!(
                "{},{},{:.6},{:.6},{},{}\n",
                b.group_kind, r.group_id, r.mean_pred, r.mean_true, r.n, r.unseen
            ));
        }
    }
    s
}

/// `utterance_id,left,right,i_hat,correctness` with predictions on 0-100.
pub fn predictions_csv(predictions: &[Prediction], records: &[UtteranceRecord]) -> Result<String> {
    let pairs = pair_up(predictions, records)?;
    let mut s = String::from("utterance_id,left,right,i_hat,correctness\n");
    for (p, &(ih, t, _)) in predictions.iter().zip(&pairs) {
        let right = p.per_channel.right.map_or_else(String::new, |r| format!("{:.6}", 100.0 * r));
        s.push_str(&format!(
            "{},{:.6},{},{:.6},{}\n",
            p.utterance_id,
            100.0 * p.per_channel.left,
            right,
            ih,
            t
        ));
    }
    Ok(s)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Files produced by [`render_report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub metrics_csv: PathBuf,
    pub breakdown_csvs: Vec<PathBuf>,
    pub charts: Vec<PathBuf>,
    pub histogram: Option<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn breakdown_chart(b: &GroupBreakdown) -> String {
    let labels: Vec<String> = b.rows.iter().map(|r| r.group_id.clone()).collect();
    let bold: Vec<bool> = b.rows.iter().map(|r| r.unseen).collect();
    let pred: Vec<f64> = b.rows.iter().map(|r| r.mean_pred).collect();
    let truth: Vec<f64> = b.rows.iter().map(|r| r.mean_true).collect();
    svg::bar_chart(
        &format!("Mean correctness per {}", b.group_kind),
        "correctness (%)",
        &labels,
        &bold,
        &[
            svg::Series {
                name: "predicted",
                color: "#4c72b0",
                values: &pred,
            },
            svg::Series {
                name: "true",
                color: "#dd8452",
                values: &truth,
            },
        ],
        100.0,
    )
}

pub fn histogram_chart(h: &CorrectnessHistogram) -> String {
    let labels: Vec<String> = h.bins.iter().map(|b| format!("{:.0}-{:.0}", b.low, b.high)).collect();
    let counts: Vec<f64> = h.bins.iter().map(|b| b.count as f64).collect();
    let top = counts.iter().copied().fold(1.0, f64::max);
    svg::bar_chart(
        "Correctness distribution",
        "utterances",
        &labels,
        &[],
        &[svg::Series {
            name: "count",
            color: "#55a868",
            values: &counts,
        }],
        top * 1.1,
    )
}

/// Writes `metrics.csv`, one `breakdown_<kind>.csv` and `.svg` per breakdown,
/// and the histogram chart when one is given.
pub fn render_report(
    summaries: &[MetricSummary],
    breakdowns: &[GroupBreakdown],
    histogram: Option<&CorrectnessHistogram>,
    out_dir: &Path,
) -> Result<ReportBundle> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut bundle = ReportBundle {
        metrics_csv: out_dir.join(METRICS_CSV),
        ..Default::default()
    };
    write(&bundle.metrics_csv, &metrics_csv(summaries))?;
    for m in summaries {
        for note in &m.notes {
            bundle.warnings.push(format!("{}: {note}", m.model_name));
        }
    }
    if breakdowns.is_empty() {
        bundle.warnings.push("no breakdowns given; charts skipped".into());
    }
    for b in breakdowns {
        let csv = out_dir.join(format!("breakdown_{}.csv", b.group_kind));
        write(&csv, &breakdown_csv(std::slice::from_ref(b)))?;
        let chart = out_dir.join(format!("breakdown_{}.svg", b.group_kind));
        write(&chart, &breakdown_chart(b))?;
        bundle.breakdown_csvs.push(csv);
        bundle.charts.push(chart);
    }
    if let Some(h) = histogram {
        let path = out_dir.join(HISTOGRAM_SVG);
        write(&path, &histogram_chart(h))?;
        bundle.histogram = Some(path);
    }
    for w in &bundle.warnings {
        log::warn!("{w}");
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests;
