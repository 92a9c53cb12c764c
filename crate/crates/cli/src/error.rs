//! Command-level error type and its exit-code mapping.
//!
//! Every failure surfaces as one of two exit codes: 2 for anything wrong with
//! the inputs or flags (a malformed cell, disagreeing shapes, an illegal
//! combination), 3 for a fit that ran but failed to reach tolerance when the
//! caller asked for `--strict`. Parse failures carry the file and 1-based
//! line so the offending record is findable.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A malformed cell or record, pinned to its file and 1-based line.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// A file-level failure: unreadable, wrong shape, missing counterpart.
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    /// Inconsistent flags or cross-file disagreement.
    #[error("{0}")]
    Invalid(String),
    /// Raised only under `--strict`: the solver gave up at some penalty
    /// level, so everything at smaller lambdas was dropped from the path.
    #[error(
        "the solver did not converge at penalty level {index} (lambda = {lambda:e}); \
         smaller lambdas were dropped from the path"
    )]
    NotConverged { index: usize, lambda: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 3,
            _ => 2,
        }
    }
}

/// Shorthand for a file-level error at `path`.
pub fn file_err(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::File {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Shorthand for a cell/record error at `path:line`.
pub fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

// Library-side failures reaching the CLI all mean the problem or flags were
// invalid (non-convergence is reported via flags, not an Err), so they map to
// exit code 2 wholesale.
impl From<sgl_core::SolverError> for CliError {
    fn from(e: sgl_core::SolverError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<sgl_core::cv::CvError> for CliError {
    fn from(e: sgl_core::cv::CvError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<sgl_core::risk::RiskError> for CliError {
    fn from(e: sgl_core::risk::RiskError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<sgl_core::ModelError> for CliError {
    fn from(e: sgl_core::ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<sgl_core::LinalgError> for CliError {
    fn from(e: sgl_core::LinalgError) -> Self {
        CliError::Invalid(e.to_string())
    }
}
