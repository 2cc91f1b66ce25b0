use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Returned when an argument violates an operation's precondition
    /// (dimension mismatch, bad qubit targets, unknown names).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Returned when a forced measurement asks for an outcome of zero
    /// probability.
    #[error("impossible outcome: qubit {qubit} cannot be measured as {bit} (probability {probability:e})")]
    ImpossibleOutcome {
        qubit: usize,
        bit: u8,
        probability: f64,
    },

    /// Returned by the circuit text parser and by circuit validation.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Returned when a post-setup instruction acts on qubits owned by
    /// more than one site.
    #[error("locality violation at instruction {index} (`{instruction}`): spans sites {sites}")]
    LocalityViolation {
        index: usize,
        instruction: String,
        sites: String,
    },

    /// Returned by checks that only make sense for some trace layouts.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
