use thiserror::Error;
use walklab_core::WalkError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 3 for resource budgets, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Walk(e) if e.is_budget() => 3,
            _ => 2,
        }
    }
}
