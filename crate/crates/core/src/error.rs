//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A declarative spec (norm, mapping, domain, sampler, schedule) is malformed.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A triple whose minimal pairwise gap is at or below the distinctness threshold.
    #[error("degenerate triple: min pairwise gap {gap:e} <= {eps:e}")]
    DegenerateTriple { gap: f64, eps: f64 },

    /// A point fell outside the domain it was required to live in.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// An operation was invoked on a domain/map that does not satisfy its hypotheses.
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// Fewer distinct points than the audit needs (the class definitions assume
    /// at least three points).
    #[error("insufficient space: need at least {needed} distinct points, have {have}")]
    InsufficientSpace { needed: usize, have: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Unreadable or syntactically invalid scenario/report file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid JSON that violates the scenario schema; `path` is a
    /// JSON-pointer-style location of the offending field.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// A suite was asked to run on a corpus that cannot support it.
    #[error("suite configuration error: {0}")]
    SuiteConfig(String),
}

impl Error {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), message: message.into() }
    }
}
