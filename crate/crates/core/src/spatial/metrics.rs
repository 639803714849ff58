use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MISE")]
    Mise,
    RelativeMSE,
    Misclassification,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Mise => "MISE",
            Metric::RelativeMSE => "RelativeMSE",
            Metric::Misclassification => "Misclassification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metric: Metric,
    pub value: f64,
    pub n_eval: usize,
}

fn nonempty_pair(a: &[f64], b: &[f64]) -> Result<()> {
    Error::check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Mean squared difference over evaluation points.
pub fn mise(estimates: &[f64], truths: &[f64]) -> Result<EvaluationReport> {
    nonempty_pair(estimates, truths)?;
    let ss: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum();
    Ok(EvaluationReport {
        metric: Metric::Mise,
        value: ss / estimates.len() as f64,
        n_eval: estimates.len(),
    })
}

/// Sum of squared errors divided by the sample variance (`n - 1` denominator)
/// of the true probabilities.
pub fn relative_mse(predicted: &[f64], truth: &[f64]) -> Result<EvaluationReport> {
    Error::check_len(truth.len(), predicted.len())?;
    if truth.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            available: truth.len(),
        });
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let var = truth.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let sse: f64 = predicted.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(EvaluationReport {
        metric: Metric::RelativeMSE,
        value: sse / var,
        n_eval: truth.len(),
    })
}

/// Fraction of points where `1{p >= threshold}` disagrees with the label.
pub fn misclassification(predicted: &[f64], labels: &[u8], threshold: f64) -> Result<EvaluationReport> {
    Error::check_len(predicted.len(), labels.len())?;
    if predicted.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let wrong = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= threshold) != y)
        .count();
    Ok(EvaluationReport {
        metric: Metric::Misclassification,
        value: wrong as f64 / predicted.len() as f64,
        n_eval: predicted.len(),
    })
}
