use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Matrix,
    Inclusion,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::Matrix => 0,
            Region::Inclusion => 1,
        }
    }
}

/// Conforming triangulation with per-element region marks. Elements are
/// stored counter-clockwise.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub region: Vec<Region>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn corners(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[e];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, e: usize) -> f64 {
        let [p, q, r] = self.corners(e);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn area(&self, e: usize) -> f64 {
        self.signed_area(e).abs()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [p, q, r] = self.corners(e);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Area and constant gradients of the three barycentric basis functions.
    pub fn basis_gradients(&self, e: usize) -> (f64, [[f64; 2]; 3]) {
        let [p, q, r] = self.corners(e);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        let inv = 1.0 / det;
        let g = [
            [(q[1] - r[1]) * inv, (r[0] - q[0]) * inv],
            [(r[1] - p[1]) * inv, (p[0] - r[0]) * inv],
            [(p[1] - q[1]) * inv, (q[0] - p[0]) * inv],
        ];
        (0.5 * det.abs(), g)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.area(e)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.n_elements())
            .filter(|&e| self.region[e] == region)
            .map(|e| self.area(e))
            .sum()
    }

    /// Vertices touched by at least one element of `region`.
    pub fn vertices_touching(&self, region: Region) -> Vec<bool> {
        let mut mark = vec![false; self.n_vertices()];
        for (e, el) in self.elements.iter().enumerate() {
            if self.region[e] == region {
                for &v in el {
                    mark[v] = true;
                }
            }
        }
        mark
    }

    /// Vertices shared by both regions.
    pub fn interface_vertices(&self) -> Vec<usize> {
        let a = self.vertices_touching(Region::Matrix);
        let b = self.vertices_touching(Region::Inclusion);
        (0..self.n_vertices()).filter(|&v| a[v] && b[v]).collect()
    }

    /// Plain-text dump: `d nv ne`, vertex lines, then `i j k region` lines.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "2 {} {}", self.n_vertices(), self.n_elements())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for (el, r) in self.elements.iter().zip(&self.region) {
            writeln!(w, "{} {} {} {}", el[0], el[1], el[2], r.code())?;
        }
        Ok(())
    }
}

/// Criss-cross grid of `nx × ny` squares of side `h` starting at `origin`.
/// Square (i, j) is cut along its rising diagonal when i + j is even and along
/// the falling diagonal otherwise; on an even grid this pattern is invariant
/// under the symmetries of the square and under shifts by an even number of
/// cells.
pub(crate) fn criss_cross(nx: usize, ny: usize, origin: [f64; 2], h: f64) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            } else {
                elements.push([v00, v10, v01]);
                elements.push([v10, v11, v01]);
            }
        }
    }
    (vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criss_cross_is_ccw_and_covers() {
        let (vertices, elements) = criss_cross(6, 4, [0.0, 0.0], 0.25);
        let region = vec![Region::Matrix; elements.len()];
        let mesh = Mesh { vertices, elements, region };
        assert_eq!(mesh.n_elements(), 48);
        for e in 0..mesh.n_elements() {
            assert!(mesh.signed_area(e) > 0.0);
        }
        assert!((mesh.total_area() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let (vertices, elements) = criss_cross(2, 2, [0.0, 0.0], 0.5);
        let mesh = Mesh { region: vec![Region::Matrix; elements.len()], vertices, elements };
        for e in 0..mesh.n_elements() {
            let (_, g) = mesh.basis_gradients(e);
            assert!((g[0][0] + g[1][0] + g[2][0]).abs() < 1e-14);
            assert!((g[0][1] + g[1][1] + g[2][1]).abs() < 1e-14);
        }
    }

    #[test]
    fn dump_layout() {
        let (vertices, elements) = criss_cross(1, 1, [0.0, 0.0], 1.0);
        let mesh = Mesh { region: vec![Region::Matrix, Region::Inclusion], vertices, elements };
        let mut out = Vec::new();
        mesh.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "2 4 2");
        assert_eq!(lines.len(), 1 + 4 + 2);
        assert!(lines[6].ends_with(" 1"));
    }
}
