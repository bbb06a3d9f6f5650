use slbvp_core::solver::FailureKind;
use slbvp_core::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Convergence = 2,
    ConvexityLost = 3,
    Config = 4,
    Diagnostic = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_failure(kind: FailureKind) -> Self {
        match kind {
            FailureKind::ConvexityLost => ExitCode::ConvexityLost,
            _ => ExitCode::Convergence,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Config, message)
    }

    /// Output failures are reported like bad input: the run cannot proceed
    /// with the given paths.
    pub fn io(what: &str, e: impl std::fmt::Display) -> Self {
        Self::new(ExitCode::Config, format!("{what}: {e}"))
    }

    pub fn from_core(e: Error) -> Self {
        let code = match &e {
            Error::ConvexityLost { .. } => ExitCode::ConvexityLost,
            Error::Convergence(_) | Error::Singular(_) | Error::Oracle(_) => ExitCode::Convergence,
            _ => ExitCode::Config,
        };
        Self::new(code, e.to_string())
    }
}
