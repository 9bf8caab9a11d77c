//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by series construction, estimation, and discovery.
#[derive(Debug, Error)]
pub enum Error {
    /// Window size is out of range for the series length.
    #[error("invalid window size {lambda} for series of length {len}")]
    InvalidWindow { lambda: usize, len: usize },

    /// Two series have no usable joint time span.
    #[error("series {p} and {q} cannot be aligned: {reason}")]
    Alignment { p: String, q: String, reason: String },

    /// Too few joint samples to estimate anything.
    #[error("insufficient samples: have {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },

    /// No (window, window, gap) configuration is feasible for a pair.
    #[error("series {p} and {q} cannot be compared: no compatible configuration")]
    NoCompatibleConfig { p: String, q: String },

    /// Non-finite or malformed numeric input.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Bad parameter combination.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// No conditioning gap satisfies the gap constraint within bounds.
    #[error("no feasible conditioning gap for {series} (need gamma in [{min}, {max}])")]
    InfeasibleConditioning { series: String, min: i64, max: i64 },

    /// Subsampling left a series too short to use.
    #[error("series {name} degenerate after subsampling: {len} observations")]
    DegenerateSeries { name: String, len: usize },

    /// Graphs being compared are defined over different node sets.
    #[error("node sets differ: {0}")]
    NodeSetMismatch(String),

    /// Dataset-level problems (duplicate names, too few series, off-grid times).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// CSV ingestion problems.
    #[error("csv: {0}")]
    Csv(String),

    /// I/O wrapper.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
