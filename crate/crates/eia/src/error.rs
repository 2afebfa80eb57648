use thiserror::Error;

#[derive(Debug, Error)]
pub enum EiaError {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("ill-conditioned linear system (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("line-shape analysis failed: {0}")]
    Analysis(String),

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    #[error("paraxial condition violated: |k| = {k:.4e} exceeds {limit:.4e}")]
    Paraxial { k: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EiaError>;

pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> EiaError {
    EiaError::InvalidParameter {
        key: key.to_string(),
        reason: reason.into(),
    }
}
