use crate::EvalError;
use gaitlab_core::GaitLabel;
use serde::{Deserialize, Serialize};

const K: usize = GaitLabel::COUNT;

/// Rows are true labels, columns predictions, both in label-code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; K]; K],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, truth: GaitLabel) -> usize {
        self.counts[truth.index()].iter().sum()
    }

    pub fn col_sum(&self, predicted: GaitLabel) -> usize {
        self.counts.iter().map(|r| r[predicted.index()]).sum()
    }

    pub fn get(&self, truth: GaitLabel, predicted: GaitLabel) -> usize {
        self.counts[truth.index()][predicted.index()]
    }
}

pub fn confusion(y_true: &[GaitLabel], y_pred: &[GaitLabel]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: GaitLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro (unweighted mean over the four classes) metrics.
/// Zero denominators give 0.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = GaitLabel::ALL
        .iter()
        .map(|&label| {
            let tp = cm.get(label, label);
            let precision = ratio(tp, cm.col_sum(label));
            let recall = ratio(tp, cm.row_sum(label));
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support: cm.row_sum(label),
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / K as f64;
    MetricsReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        accuracy: ratio(cm.trace(), cm.total()),
        per_class,
    }
}

pub fn accuracy(y_true: &[GaitLabel], y_pred: &[GaitLabel]) -> Result<f64, EvalError> {
    Ok(metrics(&confusion(y_true, y_pred)?).accuracy)
}
