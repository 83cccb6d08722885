use serde::Serialize;
use thiserror::Error;

/// One side of a bipartite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Party {
    Alice,
    Bob,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Party::Alice => f.write_str("Alice"),
            Party::Bob => f.write_str("Bob"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} probabilities, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("non-finite entry at index {idx}: {value}")]
    NonFinite { idx: usize, value: f64 },

    #[error("negative probability at index {idx}: {value}")]
    NegativeProbability { idx: usize, value: f64 },

    #[error("not normalized for inputs (x={x}, y={y}): sum={sum}")]
    NotNormalized { x: usize, y: usize, sum: f64 },

    #[error("{party}'s marginal for input {input} depends on the partner's input (deviation {deviation:e})")]
    Signaling {
        party: Party,
        input: usize,
        deviation: f64,
    },

    #[error("distribution not normalized: sum={sum}")]
    DistributionNotNormalized { sum: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear program infeasible (phase-one residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("joint distribution has no flip symmetry; advantage distillation needs one")]
    NotFlipSymmetric,

    #[error(
        "attack contains a local vertex whose sifted outputs fall outside the five Eve symbols"
    )]
    UnrepresentableSymbol,

    #[error("empty input")]
    EmptyInput,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
