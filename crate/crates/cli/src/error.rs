//! CLI errors carrying the stable exit-code contract.

use std::fmt;

/// Exit codes: 0 success, 1 check failure or runtime error, 2 config parse
/// error, 3 I/O error, 4 missing artifact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    CheckFailed = 1,
    ConfigParse = 2,
    Io = 3,
    MissingArtifact = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        CliError { code: ExitCode::ConfigParse, message: msg.to_string() }
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        CliError { code: ExitCode::Io, message: msg.to_string() }
    }

    pub fn missing(msg: impl fmt::Display) -> Self {
        CliError { code: ExitCode::MissingArtifact, message: msg.to_string() }
    }

    pub fn check(msg: impl fmt::Display) -> Self {
        CliError { code: ExitCode::CheckFailed, message: msg.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<sgdlab_core::Error> for CliError {
    fn from(e: sgdlab_core::Error) -> Self {
        CliError::check(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
