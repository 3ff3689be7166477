use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape does not fit inside the box: {0}")]
    ShapeOutsideBox(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel support radius {radius} voxels does not fit in half the box (min dimension {min_dim})")]
    KernelTooLarge { radius: f64, min_dim: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: [usize; 3], actual: [usize; 3] },

    #[error("filtered value {value} at voxel {index} lies outside [0, 1]; kernel is not normalized")]
    FilterRange { index: usize, value: f64 },

    #[error("tensor has non-positive trace {trace}: image has no interface")]
    EmptyInterface { trace: f64 },

    #[error("reference tensor is zero")]
    ZeroReference,

    #[error("all eigenvalues are zero")]
    ZeroTensor,

    #[error("no voxel passes the structure-tensor mask: image is structureless")]
    EmptyMask,

    #[error("structure-tensor orientation needs a second filter")]
    MissingSecondFilter,

    #[error("empty fiber list")]
    NoFibers,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Process exit code for the command-line front end: 1 usage, 2 I/O or
    /// format, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } => 2,
            Error::FilterRange { .. }
            | Error::EmptyInterface { .. }
            | Error::ZeroReference
            | Error::ZeroTensor
            | Error::EmptyMask => 3,
            _ => 1,
        }
    }
}
