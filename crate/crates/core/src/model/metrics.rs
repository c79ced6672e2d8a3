//! Classification and regression metrics. Undefined ratios (empty
//! denominators) score zero rather than propagating NaN.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    /// Confusion matrix, rows = truth, columns = prediction.
    pub confusion: Vec<Vec<usize>>,
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, f1 per class plus accuracy and macro f1.
pub fn classification_report(
    truth: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ClassificationReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if truth
        .iter()
        .chain(predicted.iter())
        .any(|&c| c >= n_classes)
    {
        return Err(Error::InvalidParam {
            name: "labels",
            reason: format!("class out of range for {n_classes} classes"),
        });
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let predicted_c: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
        let actual_c: usize = confusion[c].iter().sum();
        let precision = safe_ratio(tp as f64, predicted_c as f64);
        let recall = safe_ratio(tp as f64, actual_c as f64);
        let f1 = safe_ratio(2.0 * precision * recall, precision + recall);
        per_class.push(ClassScores {
            precision,
            recall,
            f1,
            support: actual_c,
        });
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / n_classes as f64;
    Ok(ClassificationReport {
        accuracy: correct as f64 / truth.len() as f64,
        per_class,
        macro_f1,
        confusion,
    })
}

/// Root mean squared error on raw (unnormalized) values.
pub fn rmse(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("values"));
    }
    let mse = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| (t - p).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt())
}
