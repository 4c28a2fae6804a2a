//! Watertight surface reconstruction from unoriented, noisy point clouds.
//!
//! A coordinate network `f: R³ -> R` is trained as the energy `|f|` of a Gibbs
//! model `p(x) ∝ exp(-β|f(x)|)`: positives come from the observed cloud,
//! negatives from persistent Langevin chains, and an Eikonal penalty keeps
//! `f` close to a signed distance function. The zero level set is then
//! extracted with marching cubes and compared against ground truth.
//!
//! Module map:
//! - [`geometry`]: point clouds, meshes, normalization, nearest neighbors, I/O
//! - [`scanner`]: simulated multi-view range scans with depth noise
//! - [`network`]: the coordinate MLP with exact first and mixed second derivatives
//! - [`ebm`]: Gibbs model, Langevin sampler and replay buffer
//! - [`trainer`]: objective, schedules, Adam and checkpointing
//! - [`mesher`]: marching-cubes extraction of the zero level set
//! - [`metrics`]: Chamfer distance, F-score, normal consistency

pub mod checkpoint;
pub mod ebm;
pub mod error;
pub mod geometry;
pub mod mesher;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod scanner;
pub mod trainer;

pub use error::{Error, Result};
pub use network::{CoordinateNetwork, NetworkConfig, NetworkGradients};
pub use geometry::{
    NormalizationTransform, Point3, PointCloud, SpatialIndex, TriangleMesh, Vector3,
};

