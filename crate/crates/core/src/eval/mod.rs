//! Statistical machinery for quality gates and evaluation protocols.

use thiserror::Error;

pub mod bench;
pub mod distortion;
pub mod kappa;
pub mod pairwise;
pub mod qa;
pub mod ratings;
pub mod stats;

pub use bench::{bench_tabulate, BenchRow, BenchTable, WARPING_ERROR};
pub use distortion::{
    distortion_acceptance, distortion_report, warping_error, Acceptance, DistortionReport,
    WarpingError,
};
pub use kappa::{cohen_kappa, kappa_matrix, KappaMatrix, RaterLabels};
pub use pairwise::{pairwise_tally, BlindingMap, DimensionTally, Outcome, PairwiseTally, SideOrder};
pub use qa::{draw_qa_sample, qa_gate, GateResult, QaConfig, QaSample};
pub use ratings::{Dimension, DistortionLevel, PairChoice, QaLevel, RatingKind, RatingRecord, RatingValue};
pub use stats::{corpus_stats, word_count, Histogram, MetricSummary, StatsConfig, StatsReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("{} sampled item(s) have no rating: {}", .0.len(), .0.join(", "))]
    Unrated(Vec<String>),
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no labels to compare")]
    NoLabels,
    #[error("label {0} is not among the declared categories")]
    UnknownLabel(String),
    #[error("at least two raters are required")]
    TooFewRaters,
    #[error("rater {rater} is not aligned with rater {reference} on the item set")]
    MisalignedItems { rater: String, reference: String },
    #[error("item {item}: expected exactly 3 distortion ratings, got {got}")]
    RaterCount { item: String, got: usize },
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("rating references unknown item {0}")]
    UnknownItem(String),
    #[error("model {model} has dimensions {got:?}, expected {expected:?}")]
    DimensionMismatch {
        model: String,
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("dimension {0} is excluded from benchmark tables")]
    ExcludedDimension(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("invalid histogram edges for {metric}: {reason}")]
    Bins { metric: String, reason: String },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Csv(e.to_string())
    }
}

pub(crate) fn csv_string(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, EvalError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| EvalError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Csv(e.to_string()))
}
