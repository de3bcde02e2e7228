//! Text-similarity and classification metrics for judging reconstructions.

pub mod confusion;
pub mod metrics;
pub mod report;

use thiserror::Error;

pub use confusion::{confusion_and_scores, ClassScores, ConfusionMatrix, SevereSplit};
pub use metrics::{bleu, conceptual_precision, lcs_len, rouge_l, rouge_n, ConceptSet, PrfScore};
pub use report::{run_report, score_cases, write_report_files, CaseMetrics, CaseText, MetricReport, ReportOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("at least one reference is required")]
    NoReferences,
    #[error("gold has {gold} labels but pred has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("{file}:{line}: {reason}")]
    Parse { file: String, line: u64, reason: String },
    #[error("case `{0}` has no gold entry")]
    UnknownCase(String),
    #[error("{0}")]
    Io(String),
}
