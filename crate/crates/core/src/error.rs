use thiserror::Error;

/// Errors produced by the envelope, network and tightening machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid activation parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown activation tag `{0}`")]
    UnknownActivation(String),

    #[error("point {value} lies outside [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The activation restricted to the interval is neither convex, concave,
    /// convex-then-concave nor concave-then-convex.
    #[error("activation {activation} has no secant-then-function envelope on [{lo}, {hi}]")]
    UnsupportedShape {
        activation: String,
        lo: f64,
        hi: f64,
    },

    #[error("malformed network: {0}")]
    MalformedNetwork(String),

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("linear program is malformed: {0}")]
    MalformedLp(String),

    #[error("relaxation is infeasible: {0}")]
    Infeasible(String),

    #[error("relaxation is unbounded: {0}")]
    Unbounded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
