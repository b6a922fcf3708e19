//! Confusion matrix and the derived per-class / aggregate metrics.

use core::fmt;

use crate::preprocess::NUM_CLASSES;

/// 3×3 count matrix, rows = gold class, columns = predicted class, in the
/// fixed order negative / neutral / positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    LengthMismatch { golds: usize, preds: usize },
    Empty,
    BadClass { index: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LengthMismatch { golds, preds } => {
                write!(f, "{golds} gold labels but {preds} predictions")
            }
            EvalError::Empty => write!(f, "nothing to evaluate"),
            EvalError::BadClass { index } => {
                write!(f, "class index {index} outside the {NUM_CLASSES} classes")
            }
        }
    }
}

impl core::error::Error for EvalError {}

/// Counts each (gold, predicted) pair.
pub fn confusion(golds: &[usize], preds: &[usize]) -> Result<ConfusionMatrix, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&g, &p) in golds.iter().zip(preds) {
        if g >= NUM_CLASSES {
            return Err(EvalError::BadClass { index: g });
        }
        if p >= NUM_CLASSES {
            return Err(EvalError::BadClass { index: p });
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Gold-class counts (row sums).
    pub fn supports(&self) -> [u64; NUM_CLASSES] {
        let mut out = [0u64; NUM_CLASSES];
        for (c, row) in self.counts.iter().enumerate() {
            out[c] = row.iter().sum();
        }
        out
    }
}

/// Precision, recall and F1 for one class; `0/0` cases are defined as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// The full report: per-class scores plus unweighted (macro) and
/// support-weighted aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Support-weighted mean of per-class F1 scores — the aggregate used for
/// model selection.
pub fn weighted_f1(f1: &[f64; NUM_CLASSES], supports: &[u64; NUM_CLASSES]) -> f64 {
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return 0.0;
    }
    f1.iter()
        .zip(supports)
        .map(|(f, &s)| f * s as f64)
        .sum::<f64>()
        / total as f64
}

/// Derives the full report from a confusion matrix.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let supports = cm.supports();
    let mut per_class = [ClassMetrics {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = cm.counts[c][c];
        let predicted: u64 = (0..NUM_CLASSES).map(|g| cm.counts[g][c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, supports[c]);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class[c] = ClassMetrics {
            precision,
            recall,
            f1,
            support: supports[c],
        };
    }
    let n = NUM_CLASSES as f64;
    let f1s = [per_class[0].f1, per_class[1].f1, per_class[2].f1];
    let correct: u64 = (0..NUM_CLASSES).map(|c| cm.counts[c][c]).sum();
    Ok(MetricsReport {
        per_class,
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_f1: f1s.iter().sum::<f64>() / n,
        weighted_f1: weighted_f1(&f1s, &supports),
        accuracy: correct as f64 / total as f64,
    })
}
