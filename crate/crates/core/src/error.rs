use thiserror::Error;

/// Errors surfaced by the library and the command line driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// No value vector is consistent with the transcript under the configured budget.
    #[error("consistent set is empty at round {round}")]
    EmptySet { round: usize },

    #[error("sampler start point is not a member of the consistent set")]
    StartInfeasible,

    /// The consistent set is numerically lower dimensional.
    #[error("consistent set is degenerate: {consecutive} consecutive chords shorter than {min_length:e}")]
    Degenerate { consecutive: usize, min_length: f64 },

    #[error("grid oracle supports k <= {max}, got k = {k}")]
    DimensionTooLarge { k: usize, max: usize },

    #[error("weight estimate requested from an empty sample set")]
    EmptySampleSet,

    #[error("linear program failed: {0}")]
    NumericalFailure(String),

    #[error("scripted agent has no action for round {round}")]
    ScriptExhausted { round: usize },

    #[error("cost sequence has no round {round}")]
    OutOfRounds { round: usize },

    #[error("lower-bound construction needs an even number of arms, got {0}")]
    OddK(usize),

    #[error("utility gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
