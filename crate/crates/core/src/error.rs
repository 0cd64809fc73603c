//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain the model is defined on.
    #[error("rejected input: {0}")]
    Domain(String),

    /// The implicit solver failed to bracket or converge; signals an
    /// invalid (non-monotone) saturation model.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Malformed or inconsistent run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A state invariant was violated after a step. Carries the step
    /// report of the offending step as the primary debugging artifact.
    #[error("invariant violation: {message}")]
    Invariant {
        message: String,
        report: Box<crate::rearrange::StepReport>,
    },

    /// An ensemble member run failed; identifies the offending member.
    #[error("ensemble member (profile {profile}, sigma {sigma:?}) failed: {source}")]
    Member {
        profile: usize,
        sigma: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    /// A precondition the cascade relies on was broken internally.
    #[error("internal logic error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 check failure, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Domain(_) => 1,
            Error::Invariant { .. } => 2,
            _ => 3,
        }
    }
}
