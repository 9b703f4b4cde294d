//! Statistical channel estimation for six-dimensional movable antenna (6DMA) arrays.
//!
//! A 6DMA base station carries antenna surfaces whose 3D positions and 3D
//! rotations are both adjustable. Each surface only collects energy from
//! directions in front of it, so the map from users to candidate surface poses
//! is block sparse: a user is either visible to all antennas of a pose or to
//! none of them. This crate models that geometry, simulates uplink pilot
//! measurements taken at a small subset of candidate poses, and recovers the
//! average channel power between every user and every candidate pose from
//! those measurements.
//!
//! Module map:
//!
//! * [`geometry`]: rotations, surface poses, incidence angles, gain patterns
//! * [`channel`]: multipath channel synthesis and directional sparsity
//! * [`scenario`]: user and scatterer placement, candidate pose grids
//! * [`measurement`]: pilot transmission, received blocks, sample covariances
//! * [`estimator`]: per-pose covariance-fitting power estimation
//! * [`reconstructor`]: per-user source power and direction recovery on a grid
//! * [`metrics`]: normalized error and ergodic sum rate evaluation
//! * [`baselines`]: exhaustive measurement reference
//! * [`experiment`]: reproducible batch sweeps with CSV output

pub mod baselines;
pub mod channel;
pub mod estimator;
pub mod experiment;
pub mod geometry;
pub mod measurement;
pub mod metrics;
pub mod reconstructor;
pub mod scenario;

use thiserror::Error as ThisError;

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("{name} = {value} is outside its valid range")]
    AngleOutOfRange { name: &'static str, value: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("requested {requested} measurement poses but the grid only has {available}")]
    TooManyPoses { requested: usize, available: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("reference matrix has zero norm")]
    ZeroNormReference,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
