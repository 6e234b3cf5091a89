use std::path::PathBuf;

use signlr_core::optimizer::TrainError;

/// Process exit status for each error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Config = 2,
    Diverged = 3,
    Invariant = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("diverged: loss {loss} at step {step}")]
    Diverged { step: usize, loss: f64 },
    #[error("internal error: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::Config,
            CliError::Diverged { .. } => ExitCode::Diverged,
            CliError::Invariant(_) | CliError::Io { .. } => ExitCode::Invariant,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Core errors surfacing after configuration was accepted are treated as
/// broken invariants; validation paths map to `Config` explicitly.
impl From<signlr_core::Error> for CliError {
    fn from(e: signlr_core::Error) -> Self {
        CliError::Invariant(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { step, loss, .. } => CliError::Diverged { step, loss },
            TrainError::Core(e) => e.into(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
