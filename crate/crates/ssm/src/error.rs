//! Error types shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Error, Debug)]
pub enum Error {
    /// A matrix expected to have full row rank is numerically rank deficient.
    #[error("matrix is numerically rank deficient (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    /// A null-space basis was requested for a matrix with no null space.
    #[error("matrix has no null space ({rows} rows >= {cols} columns)")]
    EmptyNullSpace { rows: usize, cols: usize },

    /// Cholesky factorization failed: the matrix is not positive definite.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The effective channel admits no null space for AN projection.
    #[error("no null space for AN projection (n_r = {n_r} >= n_t = {n_t})")]
    NoNullSpace { n_r: usize, n_t: usize },

    /// An artificial-noise projector is required but was not supplied.
    #[error("beta < 1 requires an AN projector")]
    ProjectorRequired,

    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A bit word of the wrong length was supplied to the mapper.
    #[error("wrong bit count: expected {expected} bits, got {actual}")]
    WrongBitCount { expected: u32, actual: u32 },

    /// A scalar parameter lies outside its admissible range.
    #[error("{name} = {value} out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// A combinatorial search would enumerate too many antenna patterns.
    #[error("too many antenna patterns: C({n_a},{n_t}) = {count} exceeds limit {limit}")]
    TooManyPatterns {
        n_a: usize,
        n_t: usize,
        count: u128,
        limit: u128,
    },

    /// An unknown detector tag was requested.
    #[error("unknown detector: {0}")]
    UnknownDetector(String),

    /// Invalid experiment or system configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A model checkpoint has an unsupported format version.
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
