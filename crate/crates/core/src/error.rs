use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("row {row}: cannot parse `{value}` in column `{column}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} is constant ({value}); cannot normalize")]
    ConstantDimension { dim: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: matrix is not positive definite after nugget; remove duplicate or near-duplicate points")]
    Singular { what: &'static str },

    #[error("hyperparameter search found no finite likelihood: {0}")]
    SearchExhausted(String),

    #[error("non-finite loss at epoch {epoch} (loss = {loss}); try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("{x:?} is outside the domain: coordinate {dim} must lie in [{lower}, {upper}]")]
    OutOfDomain {
        x: Vec<f64>,
        dim: usize,
        lower: f64,
        upper: f64,
    },

    #[error("surrogate returned {count} non-finite outputs")]
    NonFiniteOutput { count: usize },

    #[error("criterion exhausted: maximum on the candidate grid is {max:e}")]
    CriterionExhausted { max: f64 },

    #[error("no oracle available; requested evaluation at {0:?}")]
    OracleUnavailable(Vec<f64>),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
