use std::fmt;
use std::io::ErrorKind;

use overfitguard::Error;

pub const OK: i32 = 0;
pub const FAILURE: i32 = 1;
pub const INPUT_IO: i32 = 3;
pub const USAGE: i32 = 64;
pub const MISSING_FILE: i32 = 66;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(USAGE, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Missing files map to 66, unreadable or malformed inputs to 3, bad
/// configuration to 64, everything else to 1.
pub fn code_for(err: &Error) -> i32 {
    match err {
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => MISSING_FILE,
        Error::Io { .. }
        | Error::ParseError { .. }
        | Error::DuplicateEpoch { .. }
        | Error::InvalidValue { .. }
        | Error::SchemaError(_)
        | Error::ModelFormatError(_)
        | Error::Json(_) => INPUT_IO,
        Error::ConfigError(_) => USAGE,
        _ => FAILURE,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::new(code_for(&err), err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::new(FAILURE, err.to_string())
    }
}

pub type CliResult<T = i32> = Result<T, CliError>;
