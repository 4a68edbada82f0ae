use thiserror::Error;

/// Errors raised by state construction, gate application and scheduling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spin index {index} out of range for a {n}-spin system")]
    SpinOutOfRange { index: usize, n: usize },

    #[error("spin {0} appears more than once in the operand list")]
    DuplicateSpin(usize),

    #[error("{gate} takes {expected} operands, got {got}")]
    Arity {
        gate: &'static str,
        expected: &'static str,
        got: usize,
    },

    #[error("spin {0} is not a designated reset spin")]
    NotResetSpin(usize),

    #[error("bias {0} lies outside [-1, 1]")]
    BiasOutOfRange(f64),

    #[error("equilibrium bias must satisfy 0 < eps0 < 1, got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid diagonal state: {0}")]
    InvalidState(String),

    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} is not supported by the {backend} backend")]
    Unsupported { what: String, backend: &'static str },

    #[error("the {backend} backend is limited to {max} spins, got {n}")]
    TooManySpins {
        backend: &'static str,
        max: usize,
        n: usize,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
