use std::io;
use std::path::PathBuf;

use ratchet_core::{IdeError, RatchetError};
use serde::Serialize;

use crate::experiment::ReferenceCheck;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration; `key` is the dotted path of the offending entry.
    #[error("{key}: {message}")]
    Validation { key: String, message: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{} reference value(s) outside tolerance", .0.len())]
    ReferenceMiss(Vec<ReferenceCheck>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation { key: key.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::ReferenceMiss(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    /// One-line JSON for the error stream.
    pub fn diagnostic(&self) -> String {
        #[derive(Serialize)]
        struct Diagnostic<'a> {
            error: &'static str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            key: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            misses: Option<&'a [ReferenceCheck]>,
        }
        let (error, key, misses) = match self {
            CliError::Validation { key, .. } => ("validation", Some(key.as_str()), None),
            CliError::Solver(_) => ("solver", None, None),
            CliError::ReferenceMiss(m) => ("reference_miss", None, Some(m.as_slice())),
            CliError::Io { .. } => ("io", None, None),
        };
        let d = Diagnostic { error, message: self.to_string(), key, misses };
        serde_json::to_string(&d).expect("diagnostics serialize")
    }
}

impl From<RatchetError> for CliError {
    fn from(e: RatchetError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<IdeError> for CliError {
    fn from(e: IdeError) -> Self {
        CliError::Solver(e.to_string())
    }
}
