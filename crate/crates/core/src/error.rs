use thiserror::Error;

pub type Result<T> = std::result::Result<T, MerwError>;

#[derive(Debug, Error)]
pub enum MerwError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("enumeration budget exceeded: {required} states required, budget is {budget}")]
    Budget { required: u128, budget: u128 },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("position overflow at step {step}")]
    Overflow { step: u64 },

    #[error("oracle mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MerwError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        MerwError::Domain(msg.into())
    }
}
