use num_bigint::BigInt;
use thiserror::Error;

/// Errors raised by the series, continued-fraction, Hankel, tower and audit layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid Mahler instance: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("prefix too short: need {needed} coefficients, have {available}")]
    PrecisionTooShort { needed: usize, available: usize },

    /// The prefix ran out before the next partial quotient could be certified.
    /// `reached` is the index of the last quotient that was certified.
    #[error("insufficient precision: certified partial quotients up to index {reached}")]
    InsufficientPrecision { reached: usize },

    /// Every known coefficient of the Euclidean remainder vanished.
    #[error("series is rational within the available prefix (remainder vanished after index {index})")]
    DegenerateRational { index: usize },

    #[error("Hankel matrix H_{size} is singular")]
    SingularHankel { size: usize },

    #[error("{what}: requested {requested}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    /// Enclosure refinement ran out of budget. `certified` holds the partial
    /// quotients that were proven before giving up.
    #[error("budget exhausted after {} certified partial quotients", certified.len())]
    BudgetExhausted { certified: Vec<BigInt> },

    #[error("cannot decide {0} at the current precision")]
    Undecidable(String),

    #[error("tau must exceed 1, got {0}")]
    TauTooSmall(String),

    #[error("q too small for the parameter recipe: {0}")]
    QTooSmall(String),

    #[error("no admissible (k, m) pair: {0}")]
    NoFeasiblePair(String),

    /// A proven inequality or exact identity failed to verify.
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
