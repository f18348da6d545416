use ncode_core::eval::{EvalError, TableError};
use ncode_core::rank::RankError;
use ncode_core::search::SearchError;
use ncode_core::space::SpaceError;
use ncode_core::trajectory::GenError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("evaluator: {0}")]
    Evaluator(String),
    #[error("endpoint: {0}")]
    Endpoint(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Evaluator(_) => 4,
            CliError::Endpoint(_) => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Other(format!("{}: {err}", path.display()))
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Table(t) => CliError::Validation(t.to_string()),
            other => CliError::Evaluator(other.to_string()),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::Config(msg) => CliError::Endpoint(msg),
            RankError::Eval(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Eval(e) => e.into(),
            GenError::Io(e) => CliError::Other(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}
