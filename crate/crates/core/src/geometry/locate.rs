use super::mesh::Mesh;

/// Bucket grid over the mesh bounding box; each bucket lists the elements
/// whose bounding boxes overlap it (flat CSR storage).
#[derive(Clone, Debug)]
pub struct PointLocator {
    lo: [f64; 2],
    inv_cell: [f64; 2],
    nb: [usize; 2],
    offsets: Vec<u32>,
    items: Vec<u32>,
}

const INSIDE_TOL: f64 = 1e-10;

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = ((mesh.n_elements() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let nb = [side, side];
        let width = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        let inv_cell = [nb[0] as f64 / width[0], nb[1] as f64 / width[1]];
        let span = |e: usize| -> [usize; 4] {
            let [a, b, c] = mesh.corners(e);
            let mut out = [0; 4];
            for k in 0..2 {
                let mn = a[k].min(b[k]).min(c[k]);
                let mx = a[k].max(b[k]).max(c[k]);
                let i0 = ((mn - lo[k]) * inv_cell[k] - 1e-9).floor().max(0.0) as usize;
                let i1 = ((mx - lo[k]) * inv_cell[k] + 1e-9).floor().max(0.0) as usize;
                out[2 * k] = i0.min(nb[k] - 1);
                out[2 * k + 1] = i1.min(nb[k] - 1);
            }
            out
        };
        let mut counts = vec![0u32; nb[0] * nb[1] + 1];
        for e in 0..mesh.n_elements() {
            let s = span(e);
            for j in s[2]..=s[3] {
                for i in s[0]..=s[1] {
                    counts[j * nb[0] + i + 1] += 1;
                }
            }
        }
        for b in 1..counts.len() {
            counts[b] += counts[b - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; *counts.last().unwrap() as usize];
        for e in 0..mesh.n_elements() {
            let s = span(e);
            for j in s[2]..=s[3] {
                for i in s[0]..=s[1] {
                    let b = j * nb[0] + i;
                    items[fill[b] as usize] = e as u32;
                    fill[b] += 1;
                }
            }
        }
        PointLocator { lo, inv_cell, nb, offsets: counts, items }
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    /// Points on shared edges resolve to any adjacent element.
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let i = ((p[0] - self.lo[0]) * self.inv_cell[0]).floor();
        let j = ((p[1] - self.lo[1]) * self.inv_cell[1]).floor();
        if i < -1.0 || j < -1.0 || i > self.nb[0] as f64 || j > self.nb[1] as f64 {
            return None;
        }
        let i = (i.max(0.0) as usize).min(self.nb[0] - 1);
        let j = (j.max(0.0) as usize).min(self.nb[1] - 1);
        let b = j * self.nb[0] + i;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &e in &self.items[self.offsets[b] as usize..self.offsets[b + 1] as usize] {
            let e = e as usize;
            let lam = barycentric(mesh, e, p);
            let worst = lam[0].min(lam[1]).min(lam[2]);
            if worst >= 0.0 {
                return Some((e, lam));
            }
            if best.map_or(true, |(_, _, w)| worst > w) {
                best = Some((e, lam, worst));
            }
        }
        best.filter(|&(_, _, w)| w >= -INSIDE_TOL).map(|(e, lam, _)| (e, lam))
    }
}

pub fn barycentric(mesh: &Mesh, e: usize, p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = mesh.corners(e);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Wraps a point of the plane into the reference cell [-1/2, 1/2).
pub fn wrap_to_cell(y: [f64; 2]) -> [f64; 2] {
    let w = |t: f64| {
        let s = t - t.round();
        if s >= 0.5 {
            s - 1.0
        } else {
            s
        }
    };
    [w(y[0]), w(y[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::{criss_cross, Region};

    #[test]
    fn locates_interior_and_vertex_points() {
        let (vertices, elements) = criss_cross(7, 7, [0.0, 0.0], 1.0 / 7.0);
        let mesh = Mesh { region: vec![Region::Matrix; elements.len()], vertices, elements };
        let loc = PointLocator::new(&mesh);
        for &p in &[[0.31, 0.77], [0.0, 0.0], [1.0, 1.0], [3.0 / 7.0, 0.5], [0.999, 0.001]] {
            let (e, lam) = loc.locate(&mesh, p).unwrap();
            let c = mesh.corners(e);
            let q = [
                lam[0] * c[0][0] + lam[1] * c[1][0] + lam[2] * c[2][0],
                lam[0] * c[0][1] + lam[1] * c[1][1] + lam[2] * c[2][1],
            ];
            assert!((q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14);
        }
        assert!(loc.locate(&mesh, [1.5, 0.5]).is_none());
    }

    #[test]
    fn wrap_is_periodic() {
        let a = wrap_to_cell([2.3, -0.7]);
        assert!((a[0] - 0.3).abs() < 1e-14 && (a[1] - 0.3).abs() < 1e-14);
        assert_eq!(wrap_to_cell([0.5, -0.5]), [-0.5, -0.5]);
    }
}
