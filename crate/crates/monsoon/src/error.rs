//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate location at ({lat}, {lon})")]
    DuplicateLocation { lat: f64, lon: f64 },

    #[error("coordinate ({lat}, {lon}) does not sit on the {spacing}-unit lattice")]
    NonLatticeCoordinate { lat: f64, lon: f64, spacing: f64 },

    #[error("location id {id} out of range (grid has {len} locations)")]
    InvalidLocation { id: usize, len: usize },

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value at line {line}: {msg}")]
    InvalidValue { line: usize, msg: String },

    #[error("incomplete daily series: {0}")]
    IncompleteSeries(String),

    #[error("conflicting blocks: {0}")]
    ConflictingBlocks(String),

    #[error("need at least 2 years, got {0}")]
    InsufficientYears(usize),

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown node potential scheme `{0}`")]
    InvalidScheme(String),

    #[error("degenerate emission: zero spread at location {0} after fallback")]
    DegenerateEmission(usize),

    #[error("degenerate climatology: zero long-term mean at location {0}")]
    DegenerateClimatology(usize),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no samples would be collected (sweeps {sweeps}, burn-in {burn_in}, thin {thin})")]
    InsufficientSamples {
        sweeps: usize,
        burn_in: usize,
        thin: usize,
    },

    #[error("instance too large for exact enumeration: {nodes} latent nodes (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    #[error("state field shapes differ: {0}")]
    ShapeMismatch(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("unknown sweep setting `{0}`")]
    UnknownSetting(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for usage/config/input problems,
    /// 1 for runtime numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) | Error::DegenerateEmission(_) | Error::DegenerateClimatology(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
