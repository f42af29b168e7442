//! Unit-cell and perforated-domain meshes.

mod cell_mesh;
mod domain_mesh;
mod locate;
mod mesh;
mod shape;

pub use cell_mesh::{build_cell_mesh, periodic_identification, CellMesh};
pub use domain_mesh::{build_perforated_mesh, distance_to_boundary, inclusion_index_set, DomainMesh, DomainType};
pub use locate::{barycentric, wrap_to_cell, PointLocator};
pub use mesh::{Mesh, Region};
pub use shape::InclusionShape;

#[allow(unused_imports)]
pub(crate) use mesh::criss_cross;
