//! Heterogeneous Dirichlet problems on perforated domains and the two-scale
//! corrected error.

mod discrepancy;
mod problem;
mod smoothing;

pub use discrepancy::{
    discrepancy, discrepancy_on, gradient_sup, gradient_sup_probe, CellData, DiscrepancyOptions, DiscrepancyReport,
    GradientSup,
};
pub use problem::{aux_inverse, solve_heterogeneous, solve_homogenized, DataField, ProblemSpec};
pub use smoothing::{bump, cutoff, gauss_legendre, mollifier_constant, smooth_and_cut, Mollifier};
