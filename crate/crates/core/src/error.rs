use thiserror::Error;

use crate::tree::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("tree {tree}: {}", join_violations(.violations))]
    Validation { tree: String, violations: Vec<Violation> },

    #[error("feature extraction: {0}")]
    Features(String),

    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("negative histogram entry {0}")]
    NegativeEntry(f64),

    #[error("cannot normalize: zero self-similarity")]
    ZeroSelfSimilarity,

    #[error("kernel({a}, {b}): {source}")]
    Pair {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("item {item}: {source}")]
    Item {
        item: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("SVM did not converge within {iterations} iterations (KKT violation {violation:.3e})")]
    Convergence { iterations: usize, violation: f64 },

    #[error("SVM: {0}")]
    Svm(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("gram file: {0}")]
    GramFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Innermost error, looking through pair and repetition annotations.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::Pair { source, .. }
            | Error::Item { source, .. }
            | Error::Repetition { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
