//! Classical node-local split criteria for binary labels.

use super::Cut;
use crate::error::{Error, Result};
use crate::spatial::FeatureMatrix;

/// `2 p (1 - p)` with `p` the fraction of ones.
pub fn gini_impurity(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyNode);
    }
    let p = labels.iter().filter(|&&y| y == 1).count() as f64 / labels.len() as f64;
    Ok(2.0 * p * (1.0 - p))
}

fn partition(x: &FeatureMatrix, y: &[u8], cut: &Cut) -> Result<(Vec<u8>, Vec<u8>)> {
    Error::check_len(x.n_rows(), y.len())?;
    if cut.feature >= x.n_cols() {
        return Err(Error::InvalidParameter(format!("feature {} out of range", cut.feature)));
    }
    let (mut l, mut r) = (Vec::new(), Vec::new());
    for (i, &yi) in y.iter().enumerate() {
        if x.get(i, cut.feature) <= cut.threshold {
            l.push(yi);
        } else {
            r.push(yi);
        }
    }
    if l.is_empty() || r.is_empty() {
        return Err(Error::EmptyChild);
    }
    Ok((l, r))
}

/// Gini decrease `I(T) - n_L/n_T I(L) - n_R/n_T I(R)` for the node made of
/// all rows of `x`.
pub fn classification_split_criterion(x: &FeatureMatrix, y: &[u8], cut: &Cut) -> Result<f64> {
    let (l, r) = partition(x, y, cut)?;
    let n = y.len() as f64;
    Ok(gini_impurity(y)? - l.len() as f64 / n * gini_impurity(&l)? - r.len() as f64 / n * gini_impurity(&r)?)
}

fn sse(v: &[u8]) -> f64 {
    let m = v.iter().map(|&y| f64::from(y)).sum::<f64>() / v.len() as f64;
    v.iter().map(|&y| (f64::from(y) - m).powi(2)).sum()
}

/// Node-variance reduction: `(SSE(T) - SSE(L) - SSE(R)) / n_T`.
pub fn regression_split_criterion(x: &FeatureMatrix, y: &[u8], cut: &Cut) -> Result<f64> {
    let (l, r) = partition(x, y, cut)?;
    Ok((sse(y) - sse(&l) - sse(&r)) / y.len() as f64)
}
