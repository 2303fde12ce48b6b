use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("solver did not converge: {message} (best feasible value {best})")]
    Solver { message: String, best: f64 },
    #[error("local slope undefined at isolated point {0}")]
    UndefinedSlope(usize),
    #[error("degenerate input at point {point}: {message}")]
    DegenerateInput { point: usize, message: String },
    #[error("unsupported space: {0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
