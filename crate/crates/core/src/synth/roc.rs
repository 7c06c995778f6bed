use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// ROC curve from a threshold sweep, with area by the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Decreasing; the first entry is `+inf` for the (0, 0) point.
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
}

/// ROC/AUC of `scores` for predicting `labels`. Tied scores move both rates
/// together, so the area counts tied positive/negative pairs as 1/2.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<RocResult> {
    if labels.len() != scores.len() {
        return Err(RcaError::InvalidInput(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(RcaError::InvalidInput("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(RcaError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        thresholds.push(s);
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }
    Ok(RocResult { thresholds, tpr, fpr, auc: auc / (pos as f64 * neg as f64) })
}
