//! 4D mmWave radar point cloud toolkit.
//!
//! Synthesizes complex baseband echoes for described automotive scenes,
//! processes them into range-Doppler and range-azimuth maps, detects targets
//! with CA-CFAR, emits 4D point clouds and clusters them with a two-pass
//! (velocity, then space) DBSCAN. Evaluation primitives (IoU, positioning
//! errors, segmentation losses with gradients) round out the chain.
//!
//! Every stage is a pure function of its inputs and a seed, so whole runs are
//! reproducible bit for bit. See the `examples/` directory for one runnable
//! program per capability, and the `mmpoint` binary for config-driven runs.

pub mod array;
pub mod clustering;
pub mod detection;
pub mod echo;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod scene;

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const K_BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structured-text document does not conform to a schema.
    #[error("schema error: {0}")]
    Schema(String),
    /// A value violates a type invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// An operation precondition does not hold.
    #[error("domain error: {0}")]
    Domain(String),
    /// Array layout cannot be used by the requested operation.
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    /// A map/curve analysis could not complete (e.g. mainlobe clipped).
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
