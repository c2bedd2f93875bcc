use alloc::string::String;
use core::fmt;

/// Errors raised by model construction and the optimizers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    InvalidArgument(String),
    /// A scenario field violates one of its invariants.
    Invariant { field: &'static str, reason: String },
    /// Matrix or vector shapes do not match the scenario.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// The brute-force oracle was asked for more work than it allows.
    InstanceTooLarge { evaluations: u128, limit: u128 },
    /// No strictly feasible point exists for a convex subproblem.
    Infeasible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Invariant { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            Error::InstanceTooLarge { evaluations, limit } => write!(
                f,
                "instance too large for exhaustive search: {evaluations} evaluations exceeds {limit}"
            ),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
