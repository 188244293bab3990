//! Library backing the `fbsde` command-line tool: configuration, pipeline
//! orchestration, report serialization and text rendering.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod text;

use thiserror::Error;

/// CLI failure modes and their process exit codes: config/usage errors exit
/// 2, invariant and runtime-math failures exit 1, I/O failures exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("problem: {0}")]
    Problem(#[from] fbsde::coefficients::CoefficientError),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("solver: {0}")]
    Pde(#[from] fbsde::pde::PdeError),
    #[error("simulation: {0}")]
    Sim(#[from] fbsde::simulate::SimError),
    #[error("verification: {0}")]
    Verify(#[from] fbsde::verify::VerifyError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Problem(_) => 2,
            CliError::Invariant(_) | CliError::Pde(_) | CliError::Sim(_) | CliError::Verify(_) => 1,
            CliError::Io(_) | CliError::Json(_) => 3,
        }
    }
}
