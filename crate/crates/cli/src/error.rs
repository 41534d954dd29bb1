use gridwac::synth::SynthError;
use std::fmt;

pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_HASH_MISMATCH: u8 = 65;
pub const EXIT_NO_INPUT: u8 = 66;
pub const EXIT_FAILURE: u8 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    HashMismatch(String),
    Input(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::HashMismatch(_) => EXIT_HASH_MISMATCH,
            CliError::Input(_) => EXIT_NO_INPUT,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    pub fn failure(e: impl fmt::Display) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::HashMismatch(m) => write!(f, "hash mismatch: {m}"),
            CliError::Input(m) => write!(f, "input: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Infeasible(_) | SynthError::NoFeasibleMu { .. } => CliError::Infeasible(e.to_string()),
            SynthError::GainFile(m) => CliError::Input(m),
            other => CliError::Failure(other.to_string()),
        }
    }
}
