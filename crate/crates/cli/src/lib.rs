//! Experiment orchestration for the cross-lingual quantification pipeline:
//! configuration, the run/synth/report commands, and exit-code policy.

use std::fmt;

pub mod config;
pub mod pipeline;
pub mod report;
pub mod synth;

/// Command errors, split by exit code: configuration and input-file
/// problems exit 2, pipeline failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Pipeline {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Pipeline { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Pipeline { stage, message } => write!(f, "[{stage}] {message}"),
        }
    }
}

impl std::error::Error for CliError {}
