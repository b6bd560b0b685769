use std::path::PathBuf;

use mann_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MannError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zero-norm key with strict cosine similarity")]
    ZeroNormKey,
    #[error("invalid label: {0}")]
    Label(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset ingestion failed for {root}: {problems:?}")]
    Ingestion {
        root: PathBuf,
        problems: Vec<String>,
    },
    #[error("gram matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("function is not deterministic: {first} then {second} at the same point")]
    NonDeterministic { first: f64, second: f64 },
    #[error("train and test splits share classes: {0:?}")]
    SplitOverlap(Vec<usize>),
    #[error("numeric failure at episode {episode} (batch seed {batch_seed}): {detail}")]
    NumericFailure {
        episode: usize,
        batch_seed: u64,
        detail: String,
    },
    #[error("unknown suite {name:?}; valid suites: {valid}")]
    UnknownSuite { name: String, valid: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MannError>;
