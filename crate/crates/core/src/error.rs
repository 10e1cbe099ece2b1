use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated normal sampler gave up after {attempts} rejections (mean={mean}, std={std}, bounds=[{lower}, {upper}])")]
    SamplingExhausted { attempts: u32, mean: f64, std: f64, lower: f64, upper: f64 },

    #[error("risk table error: {0}")]
    Table(String),

    #[error("risk table {path} was built for scenario {expected}, but the active scenario is {actual}")]
    FingerprintMismatch { path: PathBuf, expected: String, actual: String },

    #[error("probe points ({p}, {v}) lie entirely outside the risk table")]
    OutsideTable { p: f64, v: f64 },

    #[error("{method} needs a risk table; build one with `occsafe build-table --out <dir>` and pass it via `--table`")]
    MissingTable { method: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
