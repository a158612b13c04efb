use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dead-end rewiring infeasible: no node has more than two followers")]
    RewiringInfeasible,
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::InvalidParameter(msg.into()))
}
