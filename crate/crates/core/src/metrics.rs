//! Evaluation metrics.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionRates {
    pub tpr: f64,
    pub tnr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

fn is_positive(label: f64) -> bool {
    label > 0.0
}

/// Class-conditional rates. A rate whose class is absent is reported as 0.
pub fn confusion(predictions: &[f64], labels: &[f64]) -> Result<ConfusionRates> {
    check_len(labels.len(), predictions.len())?;
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (is_positive(y), is_positive(p)) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    let rate = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    Ok(ConfusionRates {
        tpr: rate(tp, fn_),
        fnr: rate(fn_, tp),
        tnr: rate(tn, fp),
        fpr: rate(fp, tn),
    })
}

/// Mean of the true-positive and true-negative rates.
pub fn balanced_accuracy(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_len(labels.len(), predictions.len())?;
    let positives = labels.iter().filter(|&&y| is_positive(y)).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::UndefinedMetric(
            "balanced accuracy needs both classes among the labels".into(),
        ));
    }
    let c = confusion(predictions, labels)?;
    Ok(0.5 * (c.tpr + c.tnr))
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_len(labels.len(), predictions.len())?;
    if labels.len() < 2 {
        return Err(Error::UndefinedMetric("R^2 needs at least two samples".into()));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R^2 undefined for constant labels".into()));
    }
    let ss_res: f64 = predictions.iter().zip(labels).map(|(a, y)| (y - a).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
