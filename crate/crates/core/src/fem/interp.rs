use std::sync::Arc;

use super::function::FemFunction;
use crate::error::{LabError, Result};
use crate::geometry::{wrap_to_cell, DomainMesh, Mesh, PointLocator};

/// Point evaluation of Y-periodic data living on a cell mesh.
pub struct PeriodicSampler {
    mesh: Arc<Mesh>,
    locator: PointLocator,
}

impl PeriodicSampler {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let locator = PointLocator::new(&mesh);
        PeriodicSampler { mesh, locator }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Element and barycentric coordinates of the periodic image of `y`.
    pub fn locate(&self, y: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let w = wrap_to_cell(y);
        self.locator
            .locate(&self.mesh, w)
            .ok_or_else(|| LabError::Mesh(format!("point ({:.6}, {:.6}) not found in the cell mesh", w[0], w[1])))
    }
}

/// Samples a periodic cell field at x/ε for every vertex of the target mesh.
pub fn periodic_interpolate(cell_fn: &FemFunction, eps: f64, target: &DomainMesh) -> Result<FemFunction> {
    interpolate_onto(cell_fn, eps, &target.mesh)
}

pub fn interpolate_onto(cell_fn: &FemFunction, eps: f64, target: &Arc<Mesh>) -> Result<FemFunction> {
    let sampler = PeriodicSampler::new(cell_fn.mesh().clone());
    let m = cell_fn.m();
    let mut values = vec![0.0; target.n_vertices() * m];
    for (v, x) in target.vertices.iter().enumerate() {
        let (e, lam) = sampler.locate([x[0] / eps, x[1] / eps])?;
        cell_fn.eval_bary(e, lam, &mut values[v * m..(v + 1) * m]);
    }
    FemFunction::new(target.clone(), m, values)
}
