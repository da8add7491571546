use thiserror::Error;

pub type Result<T, E = SdeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SdeError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameters for `{name}`: {reason}")]
    InvalidParams { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("model `{0}` has no closed-form solution")]
    NoExactSolution(String),

    #[error("reference solution exploded in replication {replication}")]
    ReferenceExploded { replication: usize },

    #[error("all {replications} replications exploded")]
    AllExploded { replications: usize },

    #[error("too few finite replications ({finite}) to form a confidence interval")]
    TooFewSamples { finite: usize },

    /// Per-realization cost bounds of the adaptive scheme were violated.
    #[error("cost envelope violated: nu = {nu}, allowed [{lower}, {upper}]")]
    CostEnvelope { nu: usize, lower: f64, upper: f64 },
}

impl SdeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SdeError::Domain(msg.into())
    }
}
