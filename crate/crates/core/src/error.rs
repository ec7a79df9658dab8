use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Green's function or kernel amplitude is singular at the requested point.
    #[error("singular value: {0}")]
    Singular(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A model specification violates one of its structural rules.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("iteration diverged at step {iteration}: non-finite value encountered")]
    Diverged { iteration: usize },

    #[error("singular linear system at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("verification failed for {file}: {reason}")]
    Verification { file: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }
}
