use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] sparsepg::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// 2 for bad input, 3 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Solver(
                sparsepg::Error::Parameter(_) | sparsepg::Error::Unsupported(_) | sparsepg::Error::MeshMismatch { .. },
            ) => 2,
            BenchError::Solver(sparsepg::Error::Io(_)) | BenchError::Solver(sparsepg::Error::Csv(_)) => 1,
            BenchError::Solver(_) => 3,
            BenchError::Io(_) | BenchError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
