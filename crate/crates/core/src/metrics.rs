//! Confusion-matrix based evaluation: accuracy, precision, recall, F-score.
//!
//! Per-class scores follow the one-vs-rest reading of the confusion matrix;
//! undefined 0/0 ratios score 0. Macro averaging weights classes equally,
//! weighted averaging weights them by support.

use crate::error::{CoreError, Result};

/// K x K counts; `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Macro,
    Weighted,
}

/// Per-class precision, recall, and F-score.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f_score: Vec<f64>,
}

/// The four headline numbers reported for every model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl ConfusionMatrix {
    /// Tallies actual/predicted pairs of class indices in `0..n_classes`.
    pub fn from_labels(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(CoreError::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        if actual.is_empty() {
            return Err(CoreError::InvalidParameter(
                "cannot evaluate zero predictions".into(),
            ));
        }
        if n_classes < 2 {
            return Err(CoreError::InvalidParameter(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        let mut counts = vec![0usize; n_classes * n_classes];
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= n_classes {
                return Err(CoreError::InvalidClassIndex {
                    index: a,
                    n_classes,
                });
            }
            if p >= n_classes {
                return Err(CoreError::InvalidClassIndex {
                    index: p,
                    n_classes,
                });
            }
            counts[a * n_classes + p] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn count(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual * self.n_classes + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Rows with actual class `c`.
    pub fn support(&self, c: usize) -> usize {
        (0..self.n_classes).map(|p| self.count(c, p)).sum()
    }

    fn predicted_total(&self, c: usize) -> usize {
        (0..self.n_classes).map(|a| self.count(a, c)).sum()
    }

    /// Fraction of predictions on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let trace: usize = (0..self.n_classes).map(|c| self.count(c, c)).sum();
        trace as f64 / self.total() as f64
    }

    /// One-vs-rest precision/recall/F per class; 0/0 ratios score 0.
    pub fn class_scores(&self) -> ClassScores {
        let k = self.n_classes;
        let mut precision = Vec::with_capacity(k);
        let mut recall = Vec::with_capacity(k);
        let mut f_score = Vec::with_capacity(k);
        for c in 0..k {
            let tp = self.count(c, c);
            let p = ratio(tp, self.predicted_total(c));
            let r = ratio(tp, self.support(c));
            precision.push(p);
            recall.push(r);
            f_score.push(f_measure(p, r));
        }
        ClassScores {
            precision,
            recall,
            f_score,
        }
    }

    /// Averaged precision/recall/F plus accuracy.
    pub fn summary(&self, averaging: Averaging) -> EvalSummary {
        let scores = self.class_scores();
        let weights: Vec<f64> = match averaging {
            Averaging::Macro => vec![1.0 / self.n_classes as f64; self.n_classes],
            Averaging::Weighted => {
                let total = self.total() as f64;
                (0..self.n_classes)
                    .map(|c| self.support(c) as f64 / total)
                    .collect()
            }
        };
        let avg = |values: &[f64]| -> f64 {
            values.iter().zip(&weights).map(|(v, w)| v * w).sum()
        };
        EvalSummary {
            accuracy: self.accuracy(),
            precision: avg(&scores.precision),
            recall: avg(&scores.recall),
            f_score: avg(&scores.f_score),
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

/// F-score `2PR / (P + R)`, the harmonic mean of precision and recall;
/// 0 when both inputs are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Decimal string with `digits` places, rounding half away from zero at the
/// digit after the cut (0.9115 -> "0.912").
pub fn round_half_up(value: f64, digits: u32) -> String {
    let factor = 10f64.powi(digits as i32);
    let scaled = value * factor;
    // Nudge exact halves upward before flooring; the epsilon is far below
    // one display unit so other values are unaffected.
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5 + 1e-9).floor()
    } else {
        (scaled - 0.5 - 1e-9).ceil()
    };
    format!("{:.*}", digits as usize, rounded / factor)
}
