//! Mean-squared distances between clean-reference and processed-signal
//! representations, and their correlation with listener correctness.

mod study;

pub use study::{
    correlate_with_correctness, run_distance_study, write_correlation_csv, write_distance_csv,
    CorrelationRow, DistanceResult, DistanceStudy, DistanceStudyConfig, StudySkip,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::scalar::Scalar;

/// d_FE, d_OL or d_SG, named after the representation they compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "d_FE")]
    Fe,
    #[serde(rename = "d_OL")]
    Ol,
    #[serde(rename = "d_SG")]
    Sg,
}

impl Measure {
    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Fe => Measure::Fe,
            FeatureKind::Ol => Measure::Ol,
            FeatureKind::Spec => Measure::Sg,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Fe => "d_FE",
            Measure::Ol => "d_OL",
            Measure::Sg => "d_SG",
        })
    }
}

/// How reference and test frames are put into correspondence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Zero lag, both truncated to the shorter length.
    #[default]
    Truncate,
    /// Try every lag in `-max_lag..=max_lag` frames and keep the smallest distance.
    LagSearch { max_lag: usize },
}

fn check_compatible<S: Scalar>(reference: &FeatureMatrix<S>, test: &FeatureMatrix<S>) -> Result<()> {
    if reference.kind() != test.kind() {
        return Err(Error::KindMismatch(
            reference.kind().to_string(),
            test.kind().to_string(),
        ));
    }
    if reference.dim() != test.dim() {
        return Err(Error::ShapeMismatch {
            what: "feature dimension of distance inputs".into(),
            expected: reference.dim(),
            found: test.dim(),
        });
    }
    Ok(())
}

/// Mean of squared differences over `frames` frames starting at the given offsets.
fn mse_window<S: Scalar>(
    reference: &FeatureMatrix<S>,
    test: &FeatureMatrix<S>,
    ref_start: usize,
    test_start: usize,
    frames: usize,
) -> S {
    let mut acc = S::zero();
    for t in 0..frames {
        for (&a, &b) in reference.frame(ref_start + t).iter().zip(test.frame(test_start + t)) {
            let d = a - b;
            acc += d * d;
        }
    }
    acc / S::lit((frames * reference.dim()) as f64)
}

/// `(1 / (T F)) * sum_t sum_f (ref[t,f] - test[t,f])^2` with `T = min(T_ref, T_test)`.
pub fn mse_distance<S: Scalar>(reference: &FeatureMatrix<S>, test: &FeatureMatrix<S>) -> Result<S> {
    mse_distance_aligned(reference, test, Alignment::Truncate)
}

pub fn mse_distance_aligned<S: Scalar>(
    reference: &FeatureMatrix<S>,
    test: &FeatureMatrix<S>,
    alignment: Alignment,
) -> Result<S> {
    check_compatible(reference, test)?;
    let (tr, tt) = (reference.num_frames(), test.num_frames());
    match alignment {
        Alignment::Truncate => {
            let frames = tr.min(tt);
            if frames == 0 {
                return Err(Error::EmptyOverlap);
            }
            Ok(mse_window(reference, test, 0, 0, frames))
        }
        Alignment::LagSearch { max_lag } => {
            let mut best: Option<S> = None;
            // Positive lag delays the test signal relative to the reference.
            for lag in -(max_lag as i64)..=(max_lag as i64) {
                let (rs, ts) = if lag >= 0 { (0, lag as usize) } else { ((-lag) as usize, 0) };
                if rs >= tr || ts >= tt {
                    continue;
                }
                let frames = (tr - rs).min(tt - ts);
                let d = mse_window(reference, test, rs, ts, frames);
                best = Some(best.map_or(d, |b: S| b.min(d)));
            }
            best.ok_or(Error::EmptyOverlap)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_rows(rows, FeatureKind::Fe).unwrap()
    }

    #[test]
    fn hand_value_and_identity() {
        let a = fm(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = fm(&[vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(mse_distance(&a, &b).unwrap(), 5.0);
        assert_eq!(mse_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn truncates_to_shorter() {
        let a = fm(&[vec![1.0], vec![2.0], vec![100.0]]);
        let b = fm(&[vec![1.0], vec![4.0]]);
        assert_eq!(mse_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(mse_distance(&b, &a).unwrap(), 2.0);
    }

    #[test]
    fn mismatches_are_errors() {
        let a = fm(&[vec![1.0, 2.0]]);
        let b = fm(&[vec![1.0]]);
        assert!(matches!(mse_distance(&a, &b), Err(Error::ShapeMismatch { .. })));
        let c = FeatureMatrix::from_rows(&[vec![1.0, 2.0]], FeatureKind::Ol).unwrap();
        assert!(matches!(mse_distance(&a, &c), Err(Error::KindMismatch(..))));
    }

    #[test]
    fn lag_search_recovers_shift() {
        let base: Vec<Vec<f64>> = (0..20).map(|t| vec![(t as f64 * 0.7).sin(), t as f64]).collect();
        let shifted: Vec<Vec<f64>> = std::iter::once(vec![9.0, 9.0])
            .chain(std::iter::once(vec![-9.0, 3.0]))
            .chain(base.iter().cloned())
            .collect();
        let (a, b) = (fm(&base), fm(&shifted));
        assert!(mse_distance(&a, &b).unwrap() > 0.5);
        let d = mse_distance_aligned(&a, &b, Alignment::LagSearch { max_lag: 3 }).unwrap();
        assert_eq!(d, 0.0);
        // With max_lag 0 lag search is plain truncation.
        assert_eq!(
            mse_distance_aligned(&a, &b, Alignment::LagSearch { max_lag: 0 }).unwrap(),
            mse_distance(&a, &b).unwrap()
        );
    }
}
