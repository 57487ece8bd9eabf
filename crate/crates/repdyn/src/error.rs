//! Crate-wide error types.

use thiserror::Error;

/// Errors raised by the dense linear-algebra layer.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD failed to converge for a {rows}x{cols} matrix after {sweeps} sweeps")]
    SvdNonConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
    },
    #[error(
        "Cholesky factorization failed at pivot {pivot} (matrix not positive definite); \
         try a larger ridge than {ridge}"
    )]
    NotPositiveDefinite { pivot: usize, ridge: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite value produced in {op}")]
    NonFinite { op: &'static str },
}

/// Errors raised while generating or parsing datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        found: u32,
    },
    #[error("truncated file {path}: needed {needed} bytes, found {found}")]
    Truncated {
        path: String,
        needed: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Errors raised during model training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("shape error in {context}: {detail}")]
    Shape {
        context: &'static str,
        detail: String,
    },
}

/// Errors raised by the topology module.
#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cannot subsample {requested} points from a cloud of {available}")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error(
        "Vietoris-Rips complex on {points} points needs ~{simplices} simplices, above the \
         budget of {budget}; subsample the cloud first"
    )]
    SimplexBudget {
        points: usize,
        simplices: usize,
        budget: usize,
    },
}

/// Errors raised by operator editing.
#[derive(Debug, Error)]
pub enum EditError {
    #[error("class {0} is not present in the labels")]
    ClassAbsent(usize),
    #[error("forget class and merge class must differ (both {0})")]
    SameClass(usize),
    #[error("edit solve ill-conditioned: {0}; try a larger ridge or smaller subsample")]
    IllConditioned(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Errors raised by archives, configs and manifests.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad archive magic in {path}: expected \"KTA1\", found {found:?}")]
    BadArchiveMagic { path: String, found: [u8; 4] },
    #[error("corrupt archive {path}: {detail}")]
    CorruptArchive { path: String, detail: String },
    #[error("duplicate tensor name {name:?} in archive")]
    DuplicateName { name: String },
    #[error("tensor {name:?} not found in archive {path}")]
    MissingTensor { name: String, path: String },
    #[error("config error at line {line}: {detail}")]
    Config { line: usize, detail: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Top-level error for the crate's public API.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
