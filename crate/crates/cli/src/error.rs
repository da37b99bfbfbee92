use std::path::Path;

use qshs_core::Error;

/// CLI failure, tagged with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }

    /// Wraps a library error raised while reading or writing `path`.
    pub fn at(path: &Path, e: Error) -> CliError {
        match e {
            Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
            Error::Format(msg) => CliError::Io(format!("{}: {msg}", path.display())),
            other => CliError::from(other).with_context(&path.display().to_string()),
        }
    }

    fn with_context(self, ctx: &str) -> CliError {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
            CliError::Divergence(m) => CliError::Divergence(format!("{ctx}: {m}")),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Divergence(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Format(_) => CliError::Io(e.to_string()),
            Error::Divergence { .. } | Error::NonFiniteObjective { .. } | Error::Numerical(_) => {
                CliError::Divergence(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
