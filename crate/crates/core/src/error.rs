use thiserror::Error;

/// Failure modes of the solver, grouped by who is at fault.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates its stated invariant (bad input).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the domain of the function evaluated.
    #[error("outside domain: {0}")]
    Domain(String),

    /// The market/utility combination does not define a finite problem,
    /// or no continuous optimal strategy exists.
    #[error("model validity: {0}")]
    Model(String),

    /// A bracket search or iteration failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
