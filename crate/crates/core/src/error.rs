use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("source term evaluation failed at s = {s}: {reason}")]
    SourceEvaluation { s: f64, reason: String },

    #[error("reaction solve did not converge at node {node} (residual {residual:e})")]
    ReactionNonConvergence { node: usize, residual: f64 },

    #[error("diffusion solve did not converge at t = {time} (residual {residual:e})")]
    DiffusionNonConvergence { time: f64, residual: f64 },

    #[error("tridiagonal solve hit a zero pivot at row {row}")]
    ZeroPivot { row: usize },

    #[error("ODE integration failed at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
