//! Numerical lab for high-contrast periodic homogenization.
//!
//! Two-dimensional P1 finite elements on structured criss-cross meshes carry
//! everything: cell correctors across the contrast range and their soft/stiff
//! limits, homogenized tensors, flux correctors, a variational single-layer
//! potential with its Neumann–Poincaré operator, and the two-scale corrected
//! error on perforated domains.

pub mod cell;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod flux;
pub mod geometry;
pub mod lab;
pub mod layer;

pub use error::{LabError, Result};
