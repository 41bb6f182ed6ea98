//! Cell-level evaluation: row alignment by key similarity, exact-match
//! scoring after normalization, aggregate rates, and corpus statistics.

mod align;
mod report;
mod score;
mod similarity;
mod stats;

pub use align::{align_rows, AlignmentResult};
pub use report::{render_summary_markdown, summarize, CaseReport, EvalReport, ModelSummary, Summary};
pub use score::{
    compute_metrics, delta_percent, f1_percent, pct, round2, score_cells, Bucket, CaseScore,
    CellOutcome, Metrics, ScoreCounts,
};
pub use similarity::{levenshtein, similarity, SimilarityKind};
pub use stats::{corpus_stats, CorpusCase, CorpusStats, MinMaxAvg};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tau must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error("prediction row {row} has {got} cells, expected {want}")]
    PredictionArity { row: usize, got: usize, want: usize },
}
