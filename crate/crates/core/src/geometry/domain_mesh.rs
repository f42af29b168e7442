use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cell_mesh::{centroid, validate_cell_resolution, CellGeometry};
use super::mesh::{criss_cross, Mesh, Region};
use super::shape::InclusionShape;
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainType {
    /// Only inclusions at distance > κε from ∂Ω.
    TypeII,
    /// Every lattice inclusion meeting Ω, clipped by Ω.
    TypeI,
}

/// Triangulation of Ω = (0,1)² with inclusions ε(n + ω) for n in the index set.
#[derive(Clone, Debug)]
pub struct DomainMesh {
    pub mesh: Arc<Mesh>,
    pub shape: InclusionShape,
    pub epsilon: f64,
    pub kappa: f64,
    pub m_ref: usize,
    pub kind: DomainType,
    pub index_set: Vec<[i64; 2]>,
    /// Grid squares per axis of Ω.
    pub n_grid: usize,
    /// Grid squares per axis of one period cell.
    pub cell_n: usize,
}

impl DomainMesh {
    pub fn h(&self) -> f64 {
        1.0 / self.n_grid as f64
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.mesh
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, p)| on_unit_square_boundary(**p))
            .map(|(v, _)| v)
            .collect()
    }

    /// Elements whose centroid lies at distance ≥ c from ∂Ω.
    pub fn interior_mask(&self, c: f64) -> Vec<bool> {
        (0..self.mesh.n_elements())
            .map(|e| distance_to_boundary(self.mesh.centroid(e)) >= c)
            .collect()
    }

    /// Elements over which reported norms are taken: all of Ω for Type II,
    /// Ω minus the 2ε boundary layer for Type I.
    pub fn report_mask(&self) -> Option<Vec<bool>> {
        match self.kind {
            DomainType::TypeII => None,
            DomainType::TypeI => Some(self.interior_mask(2.0 * self.epsilon)),
        }
    }
}

pub(crate) fn on_unit_square_boundary(p: [f64; 2]) -> bool {
    p[0] <= 1e-12 || p[1] <= 1e-12 || p[0] >= 1.0 - 1e-12 || p[1] >= 1.0 - 1e-12
}

pub fn distance_to_boundary(p: [f64; 2]) -> f64 {
    p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1])
}

/// Returns k when ε = 1/k for an integer k ≥ 2 (to 1e-9 relative).
fn reciprocal_integer(eps: f64) -> Option<usize> {
    let k = (1.0 / eps).round();
    if k >= 2.0 && ((1.0 / eps) - k).abs() <= 1e-9 * k {
        Some(k as usize)
    } else {
        None
    }
}

/// Lattice points n with ε(n + ω) admissible for the given domain type,
/// by exhaustive search over a box that covers every candidate.
pub fn inclusion_index_set(shape: &InclusionShape, eps: f64, kappa: f64, kind: DomainType) -> Vec<[i64; 2]> {
    if eps >= 1.0 {
        log::warn!("epsilon = {eps} >= 1: no inclusion fits, index set is empty");
        return Vec::new();
    }
    if kind == DomainType::TypeII && kappa >= 0.5 {
        log::warn!("kappa = {kappa} >= 1/2: buffer test excludes every cell");
        return Vec::new();
    }
    let r = shape.axis_extent();
    let k = (1.0 / eps).ceil() as i64;
    let mut set = Vec::new();
    for n2 in -1..=k + 1 {
        for n1 in -1..=k + 1 {
            // Extent of the closed inclusion along each axis.
            let lo = [eps * (n1 as f64 - r), eps * (n2 as f64 - r)];
            let hi = [eps * (n1 as f64 + r), eps * (n2 as f64 + r)];
            let keep = match kind {
                DomainType::TypeII => {
                    let inside = (0..2).all(|i| lo[i] > 0.0 && hi[i] < 1.0);
                    let dist = (0..2).map(|i| lo[i].min(1.0 - hi[i])).fold(f64::INFINITY, f64::min);
                    inside && dist > kappa * eps
                }
                DomainType::TypeI => (0..2).all(|i| lo[i] < 1.0 && hi[i] > 0.0),
            };
            if keep {
                set.push([n1, n2]);
            }
        }
    }
    set
}

pub fn build_perforated_mesh(
    shape: InclusionShape,
    eps: f64,
    kappa: f64,
    m_ref: usize,
    kind: DomainType,
) -> Result<DomainMesh> {
    if m_ref < 4 {
        return Err(LabError::invalid(format!("m_ref = {m_ref} must be at least 4")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::invalid(format!("epsilon must be positive, got {eps}")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(LabError::invalid(format!("kappa must be positive, got {kappa}")));
    }
    let cell_n = 4 * m_ref;
    validate_cell_resolution(&shape, cell_n)?;
    let index_set = inclusion_index_set(&shape, eps, kappa, kind);
    let k = if eps >= 1.0 {
        1
    } else {
        reciprocal_integer(eps)
            .ok_or_else(|| LabError::invalid(format!("epsilon = {eps} is not 1/k for an integer k >= 2")))?
    };
    let n_grid = k * cell_n;
    let (grid, elements) = criss_cross(n_grid, n_grid, [0.0, 0.0], 1.0 / n_grid as f64);
    let grid: Vec<[f64; 2]> = grid
        .into_iter()
        .map(|p| [snap_unit(p[0]), snap_unit(p[1])])
        .collect();

    let geo = CellGeometry::new(shape, cell_n);
    let members: HashSet<[i64; 2]> = index_set.iter().copied().collect();
    // Position of a point relative to the nearest lattice centre εn.
    let local = |p: [f64; 2]| -> ([i64; 2], [f64; 2]) {
        let n = [(p[0] / eps).round() as i64, (p[1] / eps).round() as i64];
        (n, [p[0] / eps - n[0] as f64, p[1] / eps - n[1] as f64])
    };

    let region = elements
        .iter()
        .map(|el| {
            let (n, y) = local(centroid(&grid, el));
            if members.contains(&n) && geo.inside(y) {
                Region::Inclusion
            } else {
                Region::Matrix
            }
        })
        .collect();
    let vertices = grid
        .iter()
        .map(|&p| {
            let (n, y) = local(p);
            if members.contains(&n) {
                let q = geo.map(y);
                [eps * (n[0] as f64 + q[0]), eps * (n[1] as f64 + q[1])]
            } else {
                p
            }
        })
        .map(|p| [snap_unit(p[0]), snap_unit(p[1])])
        .collect();

    Ok(DomainMesh {
        mesh: Arc::new(Mesh { vertices, elements, region }),
        shape,
        epsilon: eps,
        kappa,
        m_ref,
        kind,
        index_set,
        n_grid,
        cell_n,
    })
}

fn snap_unit(x: f64) -> f64 {
    if x.abs() < 1e-13 {
        0.0
    } else if (x - 1.0).abs() < 1e-13 {
        1.0
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: InclusionShape = InclusionShape::Square { r: 0.25 };

    #[test]
    fn index_sets_match_brute_force_counts() {
        // Inclusions sit at εn; with ε = 1/4 the admissible centres are
        // n ∈ {1,2,3}² (Type II) and n ∈ {0,…,4}² (Type I).
        let ii = inclusion_index_set(&SQ, 0.25, 0.1, DomainType::TypeII);
        assert_eq!(ii.len(), 9);
        let i = inclusion_index_set(&SQ, 0.25, 0.1, DomainType::TypeI);
        assert_eq!(i.len(), 25);
        assert!(inclusion_index_set(&SQ, 2.0, 0.1, DomainType::TypeII).is_empty());
        assert!(inclusion_index_set(&SQ, 0.25, 0.5, DomainType::TypeII).is_empty());
    }

    #[test]
    fn mesh_regions_and_areas() {
        let dm = build_perforated_mesh(SQ, 0.25, 0.1, 4, DomainType::TypeII).unwrap();
        assert_eq!(dm.n_grid, 64);
        assert!((dm.mesh.total_area() - 1.0).abs() < 1e-12);
        let incl = dm.mesh.region_area(Region::Inclusion);
        assert!((incl - 9.0 * 0.25 / 16.0).abs() < 1e-12);
        for (v, p) in dm.mesh.vertices.iter().enumerate() {
            let _ = v;
            assert!(p[0] >= 0.0 && p[0] <= 1.0);
        }
    }

    #[test]
    fn type_one_clips_boundary_cells() {
        let dm = build_perforated_mesh(SQ, 0.25, 0.1, 4, DomainType::TypeI).unwrap();
        // 9 full, 12 half and 4 quarter inclusions.
        let expected = (9.0 + 6.0 + 1.0) * 0.25 / 16.0;
        assert!((dm.mesh.region_area(Region::Inclusion) - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_reciprocal_eps() {
        assert!(build_perforated_mesh(SQ, 0.3, 0.1, 4, DomainType::TypeII).is_err());
        assert!(build_perforated_mesh(SQ, 0.25, 0.1, 3, DomainType::TypeII).is_err());
    }

    #[test]
    fn large_eps_gives_empty_set() {
        let dm = build_perforated_mesh(SQ, 2.0, 0.1, 4, DomainType::TypeII).unwrap();
        assert!(dm.index_set.is_empty());
        assert_eq!(dm.mesh.region_area(Region::Inclusion), 0.0);
    }
}
