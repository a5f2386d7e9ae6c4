use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dynamic friction is only defined for v > 0 (got v = {0})")]
    FrictionDomain(f64),

    #[error("block index {index} out of range for a chain of {n_blocks} blocks")]
    BlockIndex { index: usize, n_blocks: usize },

    #[error("no multistep history available; take a bootstrap step first")]
    MissingHistory,

    #[error("non-finite state at t = {time} (block {block})")]
    NonFinite { time: f64, block: usize },

    #[error("no global stick reached within warm-up cap t = {cap}")]
    NoGlobalStick { cap: f64 },

    #[error("sample at t = {got} arrived after t = {last}")]
    OutOfOrderSample { last: f64, got: f64 },

    #[error("total slip must be positive to define a magnitude (got {0})")]
    NonPositiveSlip(f64),

    #[error("catalog contains no events")]
    EmptyCatalog,

    #[error("fit needs at least 2 nonzero bins inside [{lo}, {hi}], found {found}")]
    InsufficientBins { lo: f64, hi: f64, found: usize },

    #[error("distributions share no magnitude bins after dropping the lowest common bin")]
    EmptyIntersection,

    #[error("distributions are not comparable: {0}")]
    Incompatible(String),

    #[error("scaling level {level} (N = {n_blocks}) produced an empty catalog")]
    EmptyLevel { level: u32, n_blocks: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
