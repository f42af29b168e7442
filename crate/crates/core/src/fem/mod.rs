//! P1 finite elements: coefficients, constraints, assembly, solvers, norms.

mod assembly;
mod coefficient;
mod constraints;
mod function;
mod interp;
mod solver;
mod sparse;

pub use assembly::{
    apply_stiffness, assemble, assemble_matrix, flux_load, load_vector, quad_points, reduced_rhs, LinearSystem, Scratch,
    Stiffness, QUAD_BARY,
};
pub use coefficient::{tensor_index, CoefficientField, ContrastWeight};
pub use constraints::{ConstraintKind, Constraints};
pub use function::{ElementFilter, FemFunction, Norms, P0Field};
pub use interp::{interpolate_onto, periodic_interpolate, PeriodicSampler};
pub use solver::{solve, Backend, Factorized, SolveStats, SolverOptions};
pub use sparse::CsrMatrix;
