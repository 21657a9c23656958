use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },

    #[error("{0} list is empty")]
    EmptyList(&'static str),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("symptom `{0}` is listed as both present and absent")]
    Contradiction(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-binary entry `{value}` at row {row}, column {col}")]
    NonBinaryEntry { row: usize, col: usize, value: String },

    #[error("disease `{0}` has no associated symptoms (all-zero column)")]
    ZeroColumn(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal energy must be positive, got {0}")]
    NonPositiveSignalEnergy(f64),

    #[error("quadrature did not converge (estimated error {error:e} after {evaluations} evaluations)")]
    QuadratureNonConvergence { error: f64, evaluations: usize },

    #[error("non-finite value in {message} at iteration {iteration}")]
    NonFinite { iteration: usize, message: &'static str },

    #[error("support budget exceeded: {count} candidate supports (limit {limit})")]
    SupportBudgetExceeded { count: u128, limit: u128 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("ground truth has zero symptom-space energy (vignette {0})")]
    ZeroEnergyTruth(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, message: impl ToString) -> Self {
        Error::Parse {
            what,
            message: message.to_string(),
        }
    }

    /// Numerical failures (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. } | Error::NonFinite { .. }
        )
    }
}
