use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown test case `{0}`")]
    UnknownCase(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tableau structure: {0}")]
    Structure(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
