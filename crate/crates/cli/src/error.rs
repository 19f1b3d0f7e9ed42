use std::fmt;
use std::process::ExitCode;

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, unreadable or malformed input. Exit 2.
    Invalid(String),
    /// A simulation invariant broke. Exit 3; `dump` is a JSON diagnostic.
    Invariant { message: String, dump: String },
    /// Output could not be written. Exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Invariant { .. } => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "error: {msg}"),
            CliError::Invariant { message, dump } => {
                write!(f, "invariant violation: {message}\n{dump}")
            }
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mfbandit::Error> for CliError {
    fn from(e: mfbandit::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}
