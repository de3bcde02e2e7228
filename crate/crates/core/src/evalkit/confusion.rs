//! Three-class severity confusion matrix and per-class scores.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::triage::Severity;

/// Rows are the true level, columns the predicted level, both in
/// Mild, Moderate, Severe order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: [Severity; 3],
    pub counts: [[u64; 3]; 3],
}

/// One-vs-rest scores; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: Severity,
    pub support: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Severe versus everything else: `a` severe kept severe, `b` severe called
/// milder, `c` milder called severe, `d` milder kept milder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SevereSplit {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    let (p, r) = (p?, r?);
    Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self { labels: Severity::ALL, counts: [[0; 3]; 3] }
    }

    pub fn from_pairs(gold: &[Severity], pred: &[Severity]) -> Result<Self, EvalError> {
        if gold.len() != pred.len() {
            return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
        }
        let mut m = Self::new();
        for (g, p) in gold.iter().zip(pred) {
            m.counts[g.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn class_scores(&self) -> Vec<ClassScores> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let tp = self.counts[i][i];
                let precision = ratio(tp, self.col_sum(i));
                let recall = ratio(tp, self.row_sum(i));
                ClassScores { label, support: self.row_sum(i), precision, recall, f1: f1(precision, recall) }
            })
            .collect()
    }

    pub fn severe_split(&self) -> SevereSplit {
        let s = Severity::Severe.index();
        let a = self.counts[s][s];
        let b = self.row_sum(s) - a;
        let c = self.col_sum(s) - a;
        let d = self.total() - a - b - c;
        SevereSplit { a, b, c, d }
    }
}

impl SevereSplit {
    /// `A / (A + C)`
    pub fn precision(&self) -> Option<f64> {
        ratio(self.a, self.a + self.c)
    }

    /// `A / (A + B)`
    pub fn recall(&self) -> Option<f64> {
        ratio(self.a, self.a + self.b)
    }

    pub fn f1(&self) -> Option<f64> {
        f1(self.precision(), self.recall())
    }
}

/// Matrix plus per-class scores in one call.
pub fn confusion_and_scores(gold: &[Severity], pred: &[Severity]) -> Result<(ConfusionMatrix, Vec<ClassScores>), EvalError> {
    let m = ConfusionMatrix::from_pairs(gold, pred)?;
    let scores = m.class_scores();
    Ok((m, scores))
}
