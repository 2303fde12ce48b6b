//! Configuration-driven runner for the rcdlab checkers: parses sweep
//! configurations, evaluates their grids in parallel and writes CSV or JSON
//! reports.

pub mod config;
pub mod oracle;
pub mod presets;
pub mod report;
pub mod suite;

pub use config::{parse_config, SweepConfig};
pub use suite::{run_suite, SuiteOutcome};

/// Failures that stop the runner before or after the sweep. All of them
/// exit with code 2; failing rows exit with code 1 instead.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Semantic { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        2
    }
}
