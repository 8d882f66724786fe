use std::fmt;

use dronelight_core::forest::ForestError;
use dronelight_core::signal::SignalError;
use dronelight_core::synth::{DatasetError, SynthError};
use dronelight_core::ParseLabelError;
use dronelight_service::{PaintError, ServiceError};

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Files, sockets, configuration: exit 1.
    Env(String),
    /// Bad letters, no gesture, unusable data shapes: exit 2.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Env(_) => 1,
            CliError::Domain(_) => 2,
        }
    }

    pub fn env(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Env(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Env(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ParseLabelError> for CliError {
    fn from(e: ParseLabelError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::Io(_) | ForestError::Format(_) => CliError::Env(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Env(e.to_string())
    }
}

impl From<PaintError> for CliError {
    fn from(e: PaintError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        CliError::Env(e.to_string())
    }
}
