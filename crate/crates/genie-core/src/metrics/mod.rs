//! Intrinsic evaluation metrics: ROUGE-L, K-Precision, vocd-D, dataset
//! statistics, and a prediction-scoring harness.

mod kprecision;
mod report;
mod rouge;
mod vocd;

pub use kprecision::k_precision;
pub use report::{dataset_stats, eval_predictions, DatasetStats, DiversityMode, EvalOptions, ExampleScores, MetricReport};
pub use rouge::{rouge_l, rouge_l_tokens, RougeScore};
pub use vocd::{fit_d, ttr_curve, vocd_d, DiversityReport, VocdConfig, D_MAX};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("candidate has no scoreable tokens")]
    EmptyCandidate,
    #[error("text too short for vocd sampling: need {needed} tokens, got {got}")]
    TextTooShort { needed: usize, got: usize },
    #[error("invalid vocd sampling parameters")]
    BadSampling,
    #[error("prediction/reference/content lengths differ: {preds}/{golds}/{contents}")]
    LengthMismatch {
        preds: usize,
        golds: usize,
        contents: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{0} scoring requested but no service configured")]
    ScorerMissing(&'static str),
}
