use std::fmt;
use std::path::PathBuf;

use graphpack_core::Error as CoreError;

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// dotted field path, e.g. `job_types[0].edges[1]`
    pub path: String,
    /// 1-based line of the offending value, when it occurs in the file
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("\n  {i}")).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: {} invalid field(s):{}", issues.len(), list(issues))]
    Validation { path: PathBuf, issues: Vec<Issue> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 validation, 3 capacity or state space, 4 numerical, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CoreError::InvalidCluster(_)
                | CoreError::InvalidJob { .. }
                | CoreError::InvalidTemplate(_)
                | CoreError::InvalidParams(_) => 2,
                CoreError::StateSpaceTooLarge { .. } | CoreError::InfeasibleLoad => 3,
                CoreError::Domain(_)
                | CoreError::Reducible(_)
                | CoreError::Singular
                | CoreError::SupportMismatch(_)
                | CoreError::Numerical(_) => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
