//! Regression and binary-classification metrics.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionMetrics {
    pub mse: f64,
    pub r2_train: f64,
    pub r2_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there are no actual positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "metric",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    Ok(())
}

fn check_labels(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(y) => Err(invalid!("labels must be 0 or 1, got {y}")),
        None => Ok(()),
    }
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    same_len(pred, target)?;
    if pred.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Negative when the
/// predictions are worse than the target mean.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64> {
    same_len(pred, target)?;
    if target.len() < 2 {
        return Err(invalid!("r2 needs at least 2 samples"));
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(invalid!("r2 is undefined for a constant target"));
    }
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Confusion matrix of `prob >= threshold` against binary labels.
pub fn confusion(prob: &[f64], label: &[f64], threshold: f64) -> Result<Confusion> {
    same_len(prob, label)?;
    if prob.is_empty() {
        return Err(Error::Empty("classification input"));
    }
    check_labels(label)?;
    let mut c = Confusion::default();
    for (&p, &y) in prob.iter().zip(label) {
        match (p >= threshold, y == 1.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(accuracy, precision, recall, f1)` at `threshold`.
pub fn confusion_metrics(
    prob: &[f64],
    label: &[f64],
    threshold: f64,
) -> Result<(f64, f64, f64, f64)> {
    let c = confusion(prob, label, threshold)?;
    Ok((c.accuracy(), c.precision(), c.recall(), c.f1()))
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counting half.
pub fn roc_auc(score: &[f64], label: &[f64]) -> Result<f64> {
    same_len(score, label)?;
    check_labels(label)?;
    if let Some(s) = score.iter().find(|s| s.is_nan()) {
        return Err(invalid!("scores must not be NaN, got {s}"));
    }
    let n_pos = label.iter().filter(|&&y| y == 1.0).count();
    let n_neg = label.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid!("roc_auc needs both classes"));
    }
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    // midranks over tie groups, 1-based
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && score[idx[end]] == score[idx[start]] {
            end += 1;
        }
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let positives = idx[start..end].iter().filter(|&&i| label[i] == 1.0).count();
        pos_rank_sum += mid_rank * positives as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn classification_metrics(
    prob: &[f64],
    label: &[f64],
    threshold: f64,
) -> Result<ClassificationMetrics> {
    let (accuracy, precision, recall, f1) = confusion_metrics(prob, label, threshold)?;
    Ok(ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1,
        roc_auc: roc_auc(prob, label)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(r2(&[0.0, 0.0], &[-1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(r2(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(), -3.0);
        assert!(r2(&[1.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(r2(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let (acc, p, r, f1) = confusion_metrics(&[0.9, 0.9, 0.1], &[1.0, 0.0, 0.0], 0.5).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p, 0.5);
        assert_eq!(r, 1.0);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);

        assert_eq!(
            confusion_metrics(&[0.8, 0.2], &[1.0, 0.0], 0.5).unwrap(),
            (1.0, 1.0, 1.0, 1.0)
        );
        let (_, p, r, f1) = confusion_metrics(&[0.1, 0.2], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
        assert!(confusion_metrics(&[], &[], 0.5).is_err());
        assert!(confusion_metrics(&[0.3], &[0.5], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1.0, 1.0, 0.0, 0.0]).unwrap(),
            1.0
        );
        assert_eq!(
            roc_auc(&[0.4; 6], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(),
            0.5
        );
        assert_eq!(roc_auc(&[0.1, 0.9], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(roc_auc(&[0.1, 0.9], &[1.0, 1.0]).is_err());
    }
}
