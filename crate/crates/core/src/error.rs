use thiserror::Error;

/// Errors raised by the simulator, estimators and oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested simulation would exceed a configured resource budget.
    /// This is not a model error; rerun with a smaller horizon or a larger budget.
    #[error("resource limit exceeded: {what} needs {requested}, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        requested: u64,
        budget: u64,
    },

    /// The object is not in the state the operation requires
    /// (e.g. envelope checks on a field sampled without paths).
    #[error("invalid state: {0}")]
    State(String),

    /// Rejection sampling did not accept within the attempt budget.
    #[error("rejection sampling exhausted after {attempts} attempts")]
    RejectionExhausted { attempts: u64 },

    /// A statistical fit could not be carried out on the given data.
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
