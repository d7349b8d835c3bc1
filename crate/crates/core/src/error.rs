use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: expected {expected} input columns, got {got}")]
    LayerShape {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("value `{value}` of column `{column}` cannot be mapped to a binary attribute")]
    Unmappable { column: String, value: String },

    #[error("subgroup (y={y}, s={s}) is empty in {context}")]
    EmptySubgroup { y: u8, s: u8, context: String },

    #[error("singleton subgroup (y={y}, s={s}) and no same-class fallback is available")]
    SingletonSubgroup { y: u8, s: u8 },

    #[error("sensitive attribute has no binary feature encoding; counterfactual flipping is undefined")]
    NonBinarySensitive,

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("invalid probability table: {0}")]
    InvalidDistribution(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
