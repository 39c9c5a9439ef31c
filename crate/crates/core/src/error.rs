use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the set it must belong to (infeasible strategy,
    /// belief off the simplex, empty interval, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent dimensions or an invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error("inner solver failed: {message} (iterations: {iterations}, bracket: [{lo}, {hi}])")]
    SolverFailure {
        message: String,
        iterations: usize,
        lo: f64,
        hi: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("impossible evidence: every parameter has zero posterior weight")]
    ImpossibleEvidence,

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("rate undefined: {0}")]
    UndefinedRate(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// The message without the kind prefix.
    pub fn message(&self) -> String {
        match self {
            Error::Domain(m) | Error::Config(m) | Error::Parse(m) => m.clone(),
            other => other.to_string(),
        }
    }

    /// Process exit code for this error: 1 for validation problems, 2 for
    /// numeric or solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverFailure { .. }
            | Error::Numeric(_)
            | Error::ImpossibleEvidence
            | Error::UndefinedRate(_)
            | Error::InvariantViolation(_) => 2,
            Error::Domain(_) | Error::Config(_) | Error::Io { .. } | Error::Parse(_) => 1,
        }
    }
}
