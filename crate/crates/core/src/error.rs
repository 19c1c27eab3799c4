use std::path::PathBuf;

use thiserror::Error;

use crate::solver::QpSolution;

/// Errors produced anywhere in the dehazing pipeline.
#[derive(Debug, Error)]
pub enum DehazeError {
    #[error("failed to read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to write {path}: {source}")]
    ImageWrite {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image dimensions {width}x{height} overflow the addressable size")]
    DimensionOverflow { width: u64, height: u64 },

    #[error("raster must be at least 1x1, got {width}x{height}")]
    EmptyRaster { width: usize, height: usize },

    #[error("data length {actual} does not match {width}x{height}x{channels}")]
    DataLength {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },

    #[error("non-finite sample in raster data")]
    NonFinite,

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("air-light indeterminate: every candidate pixel is black")]
    AirLightIndeterminate,

    #[error("pixel ({x}, {y}) lies outside the {width}x{height} raster")]
    PixelOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("message target {target} is below the lower bound {bound} of its pixel set")]
    InfeasibleTarget { target: f64, bound: f64 },

    #[error("message has an empty pixel set")]
    EmptyMessage,

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Failures of the iterative solvers.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-negative QP did not reach KKT tolerance after {} outer iterations (residual {:.3e})", .best.outer_iters, .best.kkt_residual)]
    QpNotConverged { best: Box<QpSolution> },

    #[error(
        "matrix is not positive definite (curvature {curvature:.3e} at iteration {iteration})"
    )]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("dimension mismatch: matrix is {matrix}, vector is {vector}")]
    Dimension { matrix: usize, vector: usize },
}

pub type Result<T, E = DehazeError> = std::result::Result<T, E>;
