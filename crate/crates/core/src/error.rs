use thiserror::Error;

/// Errors raised by the numerical routines and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("direction is not a unit vector (|v| = {norm})")]
    NonUnitDirection { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("support leaves the box ({context}); grow the box")]
    SupportOutsideBox { context: String },

    #[error("body too eccentric for {have} quadrature nodes, at least {required} required")]
    UnderResolvedBody { have: usize, required: usize },

    #[error("degenerate norm: {0}")]
    DegenerateNorm(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
