use thiserror::Error;

/// Errors raised by constructors, operators and analyses.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("round {round} is outside [1, {horizon}]")]
    RoundOutOfRange { round: usize, horizon: usize },

    #[error("shape mismatch: expected n={expected_n}, horizon={expected_horizon}, found n={found_n}, horizon={found_horizon}")]
    ShapeMismatch {
        expected_n: usize,
        expected_horizon: usize,
        found_n: usize,
        found_horizon: usize,
    },

    #[error("{what}: estimated {estimate} exceeds the enumeration cap of {cap}")]
    CapExceeded {
        what: String,
        estimate: u128,
        cap: u64,
    },

    #[error("a delivered predicate must contain at least one collection")]
    EmptyPredicate,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("process p{} completed only {nexts} of {horizon} rounds", process + 1)]
    IncompleteTrace {
        process: usize,
        nexts: usize,
        horizon: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_round(round: usize, horizon: usize) -> Result<()> {
    if round == 0 || round > horizon {
        return Err(Error::RoundOutOfRange { round, horizon });
    }
    Ok(())
}
