use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("timestamps not non-decreasing at line {line}: {prev} then {curr}")]
    NonMonotoneTimestamps { line: usize, prev: i64, curr: i64 },

    #[error("one-sided book at ts {ts}: mid-price undefined")]
    UndefinedMid { ts: i64 },

    #[error("book level {level} missing on {side} side")]
    MissingLevel { level: usize, side: &'static str },

    #[error("{kind} of {requested} exceeds resting quantity {resting} at price {price}")]
    Overdrawn {
        kind: &'static str,
        price: i64,
        requested: u64,
        resting: u64,
    },

    #[error("series too short: need at least {need}, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("zero total volume: imbalance undefined")]
    ZeroVolume,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("feature column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("undersampling needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("pipeline stage `{stage}` failed: {reason}")]
    Stage { stage: &'static str, reason: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
