use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("learning-rate schedule: iteration {iter} exceeds total {total}")]
    Schedule { iter: usize, total: usize },

    #[error(
        "non-finite loss in {stage} at iteration {iteration} \
         (data loss {data_loss}, physics loss {physics_loss})"
    )]
    Training {
        stage: &'static str,
        iteration: usize,
        data_loss: f64,
        physics_loss: f64,
    },

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that happen inside an optimization loop, as opposed
    /// to bad configuration or data.
    pub fn is_training_failure(&self) -> bool {
        matches!(self, Error::Training { .. })
    }

    pub(crate) fn io_at(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", path.display())))
    }
}
