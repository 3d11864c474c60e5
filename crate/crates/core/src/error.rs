//! Error type shared by all modules.

use std::fmt;

/// Library-wide error conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operand's dimension does not match the pool dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// Pool construction or validation failed; one message per violated invariant.
    InvalidPool(Vec<String>),
    /// A configuration or argument value is out of range; names the offender.
    InvalidArgument { name: String, reason: String },
    /// A numeric evaluation produced a non-finite value.
    NonFinite { context: String },
    /// Strong convexity could not be certified on the requested region.
    NotStronglyConvex { mu: f64 },
    /// A closed-form bound was requested outside its hypothesis.
    HypothesisViolated { what: String },
    /// The envelope rate is non-positive; the step size is too large for the envelope.
    EnvelopeUndefined { zeta: f64 },
    /// Too few samples to form finite differences along a trajectory.
    TrajectoryTooShort { len: usize },
    /// A required quantity (e.g. the minimum of the expected loss) is unavailable.
    Missing { what: String },
    /// CSV ingestion failure with row/column location when known.
    Csv {
        row: Option<u64>,
        column: Option<String>,
        reason: String,
    },
    /// Filesystem failure.
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidPool(violations) => {
                write!(f, "invalid task pool: {}", violations.join("; "))
            }
            Error::InvalidArgument { name, reason } => {
                write!(f, "invalid argument `{name}`: {reason}")
            }
            Error::NonFinite { context } => write!(f, "evaluation overflow in {context}"),
            Error::NotStronglyConvex { mu } => {
                write!(f, "pool not strongly convex on region (mu = {mu})")
            }
            Error::HypothesisViolated { what } => write!(f, "hypothesis violated: {what}"),
            Error::EnvelopeUndefined { zeta } => {
                write!(f, "step size too large for envelope (zeta = {zeta})")
            }
            Error::TrajectoryTooShort { len } => {
                write!(f, "trajectory too short ({len} samples, need at least 3)")
            }
            Error::Missing { what } => write!(f, "missing {what}"),
            Error::Csv {
                row,
                column,
                reason,
            } => {
                write!(f, "csv error")?;
                if let Some(r) = row {
                    write!(f, " at row {r}")?;
                }
                if let Some(c) = column {
                    write!(f, " in column `{c}`")?;
                }
                write!(f, ": {reason}")
            }
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
