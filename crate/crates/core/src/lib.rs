//! Detection of compact Lie group representation orbits in point clouds.
//!
//! Given a finite sample close to an orbit of a linear action of SO(2),
//! T^d, SU(2) or SO(3), the pipeline orthonormalizes the cloud, estimates
//! the symmetry algebra through an operator on matrix space, matches it
//! against the catalog of orbit-equivalence classes of representations,
//! reconstructs the winning orbit, and scores the fit with Hausdorff and
//! Wasserstein-2 distances.

pub mod algebra_fit;
pub mod error;
pub mod lie_pca;
pub mod matrix_kernel;
pub mod orbit_verify;
pub mod pipeline;
pub mod preprocess;
pub mod rep_catalog;
pub mod synth;

pub use error::{Error, Result};
