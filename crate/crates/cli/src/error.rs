use std::fmt;

/// Errors mapped onto the exit-code contract: model/domain problems exit
/// 1, I/O and usage problems exit 2.
#[derive(Debug)]
pub enum CliError {
    /// Model, binding, inference or enumeration failure.
    Domain(String),
    /// Missing files, unreadable data, bad flag values.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn domain(e: impl fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}
