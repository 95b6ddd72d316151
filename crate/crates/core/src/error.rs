use std::fmt;

use thiserror::Error;

/// A single failed invariant, with a human-readable location.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("model failed validation ({} violation(s)): {}", .0.len(), first_violation(.0))]
    Invalid(Vec<Violation>),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("signal `{signal}` has no belief about the state")]
    MissingStateMarginal { signal: String },

    #[error("signal `{signal}` has no belief about the signals of neighbour `{agent}`")]
    MissingSignalMarginal { signal: String, agent: String },

    /// The chain is not irreducible; `closed_set` is a nonempty proper closed set of indices.
    #[error("matrix is reducible (closed set {closed_set:?}); use absorbing_components for per-component results")]
    Reducible { closed_set: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported for this model: {0}")]
    Capability(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("singular linear system while {0}")]
    Singular(String),
}

fn first_violation(v: &[Violation]) -> String {
    v.first().map(|v| v.to_string()).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;
