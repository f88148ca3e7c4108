//! Probabilistic, initialization-free bundle adjustment.
//!
//! Landmarks are 3D Gaussians attached to each correspondence endpoint. The
//! objective combines a reprojection likelihood (whose log-determinant term
//! acts as a depth regularizer) with a Bhattacharyya overlap term that pulls
//! the two endpoint Gaussians of a match together. Poses, depths, radii and
//! the field of view are optimized from identity poses and random depths.

pub mod ad;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod optimizer;
pub mod problem;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
