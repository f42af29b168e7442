use std::collections::HashMap;
use std::sync::Arc;

use super::mesh::{criss_cross, Mesh, Region};
use super::shape::{disk_cell_map, InclusionShape};
use crate::error::{LabError, Result};

/// Triangulation of Y = (-1/2, 1/2)² with the inclusion resolved by edges.
#[derive(Clone, Debug)]
pub struct CellMesh {
    pub mesh: Arc<Mesh>,
    pub shape: InclusionShape,
    /// Grid squares per axis.
    pub n: usize,
    /// Vertex -> master vertex on the torus (identity on masters).
    pub periodic_map: Vec<usize>,
}

impl CellMesh {
    pub fn n_free(&self) -> usize {
        self.periodic_map.iter().enumerate().filter(|&(v, &m)| v == m).count()
    }

    /// Number of polygon sides of the discrete interface.
    pub fn interface_segments(&self) -> usize {
        8 * core_layers(&self.shape, self.n)
    }
}

/// Number of grid layers spanned by the inclusion core along each half-axis.
pub(crate) fn core_layers(shape: &InclusionShape, n: usize) -> usize {
    (shape.radius() * n as f64).round() as usize
}

/// Checks shared by cell and domain meshes: `n` grid squares per cell.
pub(crate) fn validate_cell_resolution(shape: &InclusionShape, n: usize) -> Result<()> {
    shape.validate()?;
    let r = shape.radius();
    if n < 8 {
        return Err(LabError::invalid(format!("cell subdivision n = {n} must be at least 8")));
    }
    // At least two grid layers between ω and ∂Y.
    if r > 0.5 - 2.0 / n as f64 + 1e-12 {
        return Err(LabError::invalid(format!(
            "inclusion radius {r} too close to the cell boundary for n = {n} (needs r <= {})",
            0.5 - 2.0 / n as f64
        )));
    }
    match shape {
        InclusionShape::Square { .. } => {
            if n % 4 != 0 {
                return Err(LabError::invalid(format!(
                    "square inclusions need n divisible by 4, got {n}"
                )));
            }
            let rn = r * n as f64;
            if (rn - rn.round()).abs() > 1e-9 {
                return Err(LabError::invalid(format!(
                    "square half-width {r} is not a multiple of the grid step 1/{n}"
                )));
            }
        }
        InclusionShape::Disk { .. } => {
            if n % 2 != 0 {
                return Err(LabError::invalid(format!("disk inclusions need even n, got {n}")));
            }
            if core_layers(shape, n) == 0 {
                return Err(LabError::invalid(format!("disk radius {r} unresolved at n = {n}")));
            }
        }
    }
    Ok(())
}

/// Local cell geometry: maps a pre-image point of Y and classifies it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CellGeometry {
    shape: InclusionShape,
    core: f64,
}

impl CellGeometry {
    pub(crate) fn new(shape: InclusionShape, n: usize) -> Self {
        let core = match shape {
            InclusionShape::Square { r } => r,
            InclusionShape::Disk { .. } => core_layers(&shape, n) as f64 / n as f64,
        };
        CellGeometry { shape, core }
    }

    /// Whether a pre-image point (an element centroid) lies inside ω.
    pub(crate) fn inside(&self, p: [f64; 2]) -> bool {
        p[0].abs().max(p[1].abs()) < self.core
    }

    pub(crate) fn map(&self, p: [f64; 2]) -> [f64; 2] {
        match self.shape {
            InclusionShape::Square { .. } => p,
            InclusionShape::Disk { r } => disk_cell_map(p, self.core, r),
        }
    }
}

pub fn build_cell_mesh(shape: InclusionShape, n: usize) -> Result<CellMesh> {
    validate_cell_resolution(&shape, n)?;
    let h = 1.0 / n as f64;
    let (grid, elements) = criss_cross(n, n, [-0.5, -0.5], h);
    // Pin the boundary lines to exact ±1/2 so periodic matching is exact.
    let grid: Vec<[f64; 2]> = grid
        .into_iter()
        .map(|p| [snap_half(p[0]), snap_half(p[1])])
        .collect();
    let geo = CellGeometry::new(shape, n);
    let region = elements
        .iter()
        .map(|el| {
            let c = centroid(&grid, el);
            if geo.inside(c) {
                Region::Inclusion
            } else {
                Region::Matrix
            }
        })
        .collect();
    let vertices = grid.iter().map(|&p| geo.map(p)).collect();
    let mesh = Mesh { vertices, elements, region };
    let periodic_map = periodic_identification(&mesh)?;
    Ok(CellMesh { mesh: Arc::new(mesh), shape, n, periodic_map })
}

fn snap_half(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        0.5
    } else if (x + 0.5).abs() < 1e-12 {
        -0.5
    } else {
        x
    }
}

pub(crate) fn centroid(v: &[[f64; 2]], el: &[usize; 3]) -> [f64; 2] {
    [
        (v[el[0]][0] + v[el[1]][0] + v[el[2]][0]) / 3.0,
        (v[el[0]][1] + v[el[1]][1] + v[el[2]][1]) / 3.0,
    ]
}

const FACE_TOL: f64 = 1e-12;

fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Identifies the faces y_k = +1/2 with y_k = -1/2. Every vertex maps to the
/// copy with all coordinates translated off the +1/2 faces; the map is
/// idempotent and sends all four corners to (-1/2, -1/2).
pub fn periodic_identification(mesh: &Mesh) -> Result<Vec<usize>> {
    let on_low = |p: [f64; 2]| (p[0] + 0.5).abs() < FACE_TOL || (p[1] + 0.5).abs() < FACE_TOL;
    let mut low: HashMap<(i64, i64), usize> = HashMap::new();
    for (v, &p) in mesh.vertices.iter().enumerate() {
        if on_low(p) {
            low.insert((quantize(p[0]), quantize(p[1])), v);
        }
    }
    let mut map = Vec::with_capacity(mesh.n_vertices());
    for (v, &p) in mesh.vertices.iter().enumerate() {
        let mut q = p;
        let mut moved = false;
        for k in 0..2 {
            if (q[k] - 0.5).abs() < FACE_TOL {
                q[k] -= 1.0;
                moved = true;
            }
        }
        if !moved {
            map.push(v);
            continue;
        }
        let master = low.get(&(quantize(q[0]), quantize(q[1]))).copied().filter(|&m| {
            let pm = mesh.vertices[m];
            (pm[0] - q[0]).abs() < FACE_TOL && (pm[1] - q[1]).abs() < FACE_TOL
        });
        match master {
            Some(m) => map.push(m),
            None => {
                return Err(LabError::Mesh(format!(
                    "vertex {v} at ({:.6}, {:.6}) has no periodic partner on the opposite face",
                    p[0], p[1]
                )))
            }
        }
    }
    Ok(map)
}
