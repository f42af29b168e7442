use std::io::Write;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::{Mesh, Region};

/// Continuous P1 field with m components, nodal values stored node-major
/// (`node*m + component`). Periodic fields carry equal values on
/// identified vertices.
#[derive(Clone, Debug)]
pub struct FemFunction {
    mesh: Arc<Mesh>,
    m: usize,
    values: Vec<f64>,
}

/// Which elements a norm integrates over.
#[derive(Clone, Debug, Default)]
pub enum ElementFilter {
    #[default]
    All,
    Region(Region),
    Mask(Arc<Vec<bool>>),
}

impl ElementFilter {
    pub fn keeps(&self, mesh: &Mesh, e: usize) -> bool {
        match self {
            ElementFilter::All => true,
            ElementFilter::Region(r) => mesh.region[e] == *r,
            ElementFilter::Mask(mask) => mask[e],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
}

impl Norms {
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

impl FemFunction {
    pub fn new(mesh: Arc<Mesh>, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || values.len() != m * mesh.n_vertices() {
            return Err(LabError::invalid(format!(
                "field of length {} does not match {} vertices × {m} components",
                values.len(),
                mesh.n_vertices()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::invalid("field contains non-finite values"));
        }
        Ok(FemFunction { mesh, m, values })
    }

    pub fn zeros(mesh: Arc<Mesh>, m: usize) -> Self {
        let n = mesh.n_vertices() * m;
        FemFunction { mesh, m, values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, m: usize, f: impl Fn([f64; 2], &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; mesh.n_vertices() * m];
        for (v, p) in mesh.vertices.iter().enumerate() {
            f(*p, &mut values[v * m..(v + 1) * m]);
        }
        Self::new(mesh, m, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, vertex: usize, comp: usize) -> f64 {
        self.values[vertex * self.m + comp]
    }

    /// Component `comp` as a scalar field.
    pub fn component(&self, comp: usize) -> FemFunction {
        let values = self.values.iter().skip(comp).step_by(self.m).copied().collect();
        FemFunction { mesh: self.mesh.clone(), m: 1, values }
    }

    pub fn eval_bary(&self, e: usize, lam: [f64; 3], out: &mut [f64]) {
        let el = self.mesh.elements[e];
        for (a, o) in out.iter_mut().enumerate().take(self.m) {
            *o = lam[0] * self.values[el[0] * self.m + a]
                + lam[1] * self.values[el[1] * self.m + a]
                + lam[2] * self.values[el[2] * self.m + a];
        }
    }

    /// Elementwise gradient: `out[α*2 + k] = ∂_k u^α`.
    pub fn element_gradient(&self, e: usize, out: &mut [f64]) {
        let (_, g) = self.mesh.basis_gradients(e);
        let el = self.mesh.elements[e];
        for a in 0..self.m {
            for k in 0..2 {
                out[a * 2 + k] = (0..3).map(|b| g[b][k] * self.values[el[b] * self.m + a]).sum();
            }
        }
    }

    pub fn gradient_p0(&self) -> P0Field {
        let mut values = vec![0.0; self.mesh.n_elements() * 2 * self.m];
        let w = 2 * self.m;
        for e in 0..self.mesh.n_elements() {
            self.element_gradient(e, &mut values[e * w..(e + 1) * w]);
        }
        P0Field { mesh: self.mesh.clone(), ncomp: w, values }
    }

    /// ∫ u^α for each component (exact for P1).
    pub fn integral(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.m];
        for e in 0..self.mesh.n_elements() {
            let area = self.mesh.area(e);
            let el = self.mesh.elements[e];
            for (a, sa) in s.iter_mut().enumerate() {
                *sa += area / 3.0 * el.iter().map(|&v| self.values[v * self.m + a]).sum::<f64>();
            }
        }
        s
    }

    /// Subtracts the discrete mean of each component over the mesh.
    pub fn remove_mean(&mut self) {
        let area = self.mesh.total_area();
        let mean: Vec<f64> = self.integral().iter().map(|s| s / area).collect();
        for (i, v) in self.values.iter_mut().enumerate() {
            *v -= mean[i % self.m];
        }
    }

    /// L2 norm and H1 seminorm over the kept elements, by exact P1 quadrature.
    pub fn norms(&self, filter: &ElementFilter) -> Norms {
        let (mut l2, mut h1) = (0.0, 0.0);
        let mut grad = vec![0.0; 2 * self.m];
        for e in 0..self.mesh.n_elements() {
            if !filter.keeps(&self.mesh, e) {
                continue;
            }
            let area = self.mesh.area(e);
            let el = self.mesh.elements[e];
            for a in 0..self.m {
                let u = [self.values[el[0] * self.m + a], self.values[el[1] * self.m + a], self.values[el[2] * self.m + a]];
                let sum = u[0] + u[1] + u[2];
                l2 += area / 12.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + sum * sum);
            }
            self.element_gradient(e, &mut grad);
            h1 += area * grad.iter().map(|g| g * g).sum::<f64>();
        }
        Norms { l2: l2.sqrt(), h1_semi: h1.sqrt() }
    }

    pub fn axpy(&mut self, a: f64, other: &FemFunction) -> Result<()> {
        if self.values.len() != other.values.len() || self.m != other.m {
            return Err(LabError::invalid("axpy on fields with different layouts"));
        }
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> FemFunction {
        FemFunction { mesh: self.mesh.clone(), m: self.m, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn difference(&self, other: &FemFunction) -> Result<FemFunction> {
        let mut d = self.clone();
        d.axpy(-1.0, other)?;
        Ok(d)
    }

    /// Text dump: `m ndof` header then one value per line.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.m, self.values.len())?;
        for v in &self.values {
            writeln!(w, "{v:.17e}")?;
        }
        Ok(())
    }
}

/// Elementwise-constant field with `ncomp` values per element.
#[derive(Clone, Debug)]
pub struct P0Field {
    pub mesh: Arc<Mesh>,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl P0Field {
    pub fn zeros(mesh: Arc<Mesh>, ncomp: usize) -> Self {
        let n = mesh.n_elements() * ncomp;
        P0Field { mesh, ncomp, values: vec![0.0; n] }
    }

    pub fn element(&self, e: usize) -> &[f64] {
        &self.values[e * self.ncomp..(e + 1) * self.ncomp]
    }

    pub fn l2(&self, filter: &ElementFilter) -> f64 {
        let mut s = 0.0;
        for e in 0..self.mesh.n_elements() {
            if filter.keeps(&self.mesh, e) {
                s += self.mesh.area(e) * self.element(e).iter().map(|v| v * v).sum::<f64>();
            }
        }
        s.sqrt()
    }

    /// Area-weighted nodal average (the lift used before smoothing).
    pub fn nodal_average(&self) -> FemFunction {
        let nc = self.ncomp;
        let mut acc = vec![0.0; self.mesh.n_vertices() * nc];
        let mut wsum = vec![0.0; self.mesh.n_vertices()];
        for e in 0..self.mesh.n_elements() {
            let area = self.mesh.area(e);
            for &v in &self.mesh.elements[e] {
                wsum[v] += area;
                for c in 0..nc {
                    acc[v * nc + c] += area * self.values[e * nc + c];
                }
            }
        }
        for (i, a) in acc.iter_mut().enumerate() {
            let w = wsum[i / nc];
            if w > 0.0 {
                *a /= w;
            }
        }
        FemFunction { mesh: self.mesh.clone(), m: nc, values: acc }
    }

    pub fn max_abs_per_element(&self) -> Vec<f64> {
        (0..self.mesh.n_elements())
            .map(|e| self.element(e).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}
