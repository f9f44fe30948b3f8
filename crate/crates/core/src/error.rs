use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("requires strong convexity (m = 0); regularize the loss first")]
    RequiresStrongConvexity,

    #[error("singular normal equations; ridge oracle needs lambda > 0 or full-rank features")]
    SingularSystem,

    #[error("oracle invalid for constrained problem: |theta*| = {norm} exceeds radius {radius}")]
    OracleOutsideDomain { norm: f64, radius: f64 },

    #[error("dataset floor: update would leave {after} points, below half of the initial {initial}")]
    DatasetFloor { initial: usize, after: usize },

    #[error("insufficient iterations for perfect mode: budget {budget} < required {required:.4}")]
    InsufficientIterations { budget: u32, required: f64 },

    #[error("budget exceeded: bootstrap size {size} is above the ceiling {ceiling}")]
    BudgetExceeded { size: usize, ceiling: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("data point violates declared bounds: {0}")]
    OutOfBounds(String),

    #[error("target accuracy {alpha:e} is below the noise floor {floor:e}")]
    Unreachable { alpha: f64, floor: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_round(self, round: usize) -> Self {
        match self {
            e @ Error::AtRound { .. } => e,
            e => Error::AtRound { round, source: Box::new(e) },
        }
    }

    /// Innermost error, skipping round annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtRound { source, .. } => source.root(),
            e => e,
        }
    }
}
