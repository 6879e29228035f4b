//! Rank and product-moment correlation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn mean<S: Scalar>(x: &[S]) -> S {
    x.iter().copied().sum::<S>() / S::lit(x.len() as f64)
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn average_ranks<S: Scalar>(x: &[S]) -> Result<Vec<S>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot rank NaN"));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![S::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..=j.
        let avg = S::lit((i + 1 + j) as f64 / 2.0);
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    Ok(ranks)
}

fn check_pair<S: Scalar>(x: &[S], y: &[S]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            what: "correlation inputs".into(),
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two pairs"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation inputs must be finite"));
    }
    Ok(())
}

/// Product-moment correlation. Constant input is undefined.
pub fn pearson<S: Scalar>(x: &[S], y: &[S]) -> Result<S> {
    check_pair(x, y)?;
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (S::zero(), S::zero(), S::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == S::zero() {
        return Err(Error::UndefinedCorrelation("first variable is constant"));
    }
    if syy == S::zero() {
        return Err(Error::UndefinedCorrelation("second variable is constant"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-S::one()).min(S::one()))
}

/// Rank correlation: Pearson on average ranks.
pub fn spearman<S: Scalar>(x: &[S], y: &[S]) -> Result<S> {
    check_pair(x, y)?;
    pearson(&average_ranks(x)?, &average_ranks(y)?)
}
