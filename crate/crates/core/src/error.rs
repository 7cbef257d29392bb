use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A structural object (measure space, partition, instance) is malformed.
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },

    /// An operator failed a precondition of the routine it was passed to.
    #[error("contract violation in {routine}: {msg}")]
    Contract { routine: &'static str, msg: String },

    /// An iterative routine ran out of iterations.
    #[error("{routine} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Instance text could not be parsed or validated.
    #[error("instance error at {location}: {msg}")]
    Instance { location: String, msg: String },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape { context, expected, got }
    }

    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid { what, msg: msg.into() }
    }

    /// True for failures of numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}
