use std::fmt;

use mastergeo::CoreError;

/// CLI failures, split by exit code: usage and input problems exit with 1,
/// numeric failures inside a run exit with 2. (Verification failures exit
/// with 3 and are handled by the verify command itself.)
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Numeric(err) => write!(f, "{err}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::InvalidModel(_)
            | CoreError::InvalidDistribution(_)
            | CoreError::ModelFile(_)
            | CoreError::EtaOutsideDomain
            | CoreError::DimensionMismatch { .. }
            | CoreError::IndexOutOfRange { .. } => CliError::Validation(err.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Validation(format!("i/o: {err}"))
    }
}
