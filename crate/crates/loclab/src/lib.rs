#![allow(clippy::needless_range_loop)]

//! Command-line laboratory over `loclab-core`: run configs, a distribution
//! and ensemble registry, deterministic tabular exports, and run manifests.

pub mod check;
pub mod config;
pub mod experiments;
pub mod export;
pub mod manifest;
pub mod registry;

/// Process exit codes used by the binary.
pub mod exit_codes {
    pub const OK: i32 = 0;
    /// Unknown experiment kind or lemma name.
    pub const UNKNOWN: i32 = 2;
    /// Invalid configuration or parameters.
    pub const INVALID: i32 = 3;
    /// Output directory cannot be created or written.
    pub const UNWRITABLE: i32 = 4;
}

#[derive(Debug)]
pub enum CliError {
    Unknown(String),
    Invalid(String),
    Unwritable(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Unknown(msg) => write!(f, "unknown: {msg}"),
            CliError::Invalid(msg) => write!(f, "invalid: {msg}"),
            CliError::Unwritable(msg) => write!(f, "unwritable: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unknown(_) => exit_codes::UNKNOWN,
            CliError::Invalid(_) => exit_codes::INVALID,
            CliError::Unwritable(_) => exit_codes::UNWRITABLE,
        }
    }
}
