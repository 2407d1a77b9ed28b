use thiserror::Error;

/// Errors raised by the identification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {needed} samples required, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("regression matrix is rank deficient at column {column} ({term})")]
    Singular { column: usize, term: String },

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("degenerate range: {0}")]
    DegenerateRange(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("simulation diverged at sample {at}")]
    Diverged { at: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("experimental data not distributed: {0}")]
    DataNotDistributed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
