//! Front end for the estimation library: config parsing, command execution,
//! and report serialization, shared between the binary and its tests.

pub mod commands;
pub mod config;
pub mod report;

/// Process exit codes, stable across releases.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const ZERO_SPREAD: i32 = 3;
    pub const CROSS_CHECK: i32 = 4;
    pub const ENUMERATION: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qmetro_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Maps an error to the documented exit code.
    pub fn exit_code(&self) -> i32 {
        use qmetro_core::Error as E;
        match self {
            CliError::Core(E::ZeroSpread) => exit_codes::ZERO_SPREAD,
            CliError::Core(E::CrossCheckFailure { .. }) => exit_codes::CROSS_CHECK,
            CliError::Core(E::NonRegular { .. }) => exit_codes::CROSS_CHECK,
            CliError::Core(E::Blowup { .. }) => exit_codes::ENUMERATION,
            CliError::Core(E::PolicyGap { .. }) => exit_codes::ENUMERATION,
            _ => exit_codes::PARSE,
        }
    }

    /// Human-facing message; names the spread failure in spectral terms.
    pub fn message(&self) -> String {
        match self {
            CliError::Core(qmetro_core::Error::ZeroSpread) => {
                "zero eigenvalue spread: the Hamiltonian carries no signal".into()
            }
            other => other.to_string(),
        }
    }
}
