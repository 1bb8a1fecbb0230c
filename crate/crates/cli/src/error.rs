use std::process::ExitCode;

use cde_core::economics::EconError;
use cde_core::mechanism::MechanismError;
use cde_core::rate_region::RateError;
use thiserror::Error;

/// Failures that stop a command before it can deliver a verdict.
///
/// Exit codes are a stable contract: 1 is reserved for "ran fine, something did not
/// verify", which commands signal through their return value rather than through this type.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or unreadable/invalid input files (exit 2).
    #[error("{0}")]
    Input(String),
    /// An exhaustive oracle would exceed its enumeration budget (exit 3).
    #[error("{0}")]
    Budget(String),
    /// A mechanism or certificate invariant broke (exit 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Budget(_) => ExitCode::from(3),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        match e {
            EconError::Budget { .. } | EconError::Rate(RateError::Budget { .. }) => CliError::Budget(e.to_string()),
            EconError::NotRational(_) | EconError::NotOptimal { .. } | EconError::Witness { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> Self {
        match e {
            MechanismError::Instance(_) | MechanismError::Config(_) => CliError::Input(e.to_string()),
            MechanismError::Invariant { .. } | MechanismError::NonTermination { .. } => CliError::Internal(e.to_string()),
        }
    }
}
