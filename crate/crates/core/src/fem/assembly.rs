use std::sync::Arc;

use super::coefficient::{tensor_index, CoefficientField, ContrastWeight};
use super::constraints::Constraints;
use super::sparse::CsrMatrix;
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, Region};

/// Barycentric coordinates of the interior 3-point rule (weights 1/3 each),
/// exact for quadratics.
pub const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub fn quad_points(mesh: &Mesh, e: usize) -> [[f64; 2]; 3] {
    let c = mesh.corners(e);
    let mut out = [[0.0; 2]; 3];
    for (q, lam) in QUAD_BARY.iter().enumerate() {
        for k in 0..2 {
            out[q][k] = lam[0] * c[0][k] + lam[1] * c[1][k] + lam[2] * c[2][k];
        }
    }
    out
}

/// Bilinear form ∫ w(region) A(x/scale) ∇u·∇v. Weights of zero drop the
/// region entirely; `contrast` gives the usual Λ weighting.
#[derive(Clone, Debug)]
pub struct Stiffness<'a> {
    pub coef: &'a CoefficientField,
    pub scale: f64,
    /// [matrix weight, inclusion weight]
    pub weights: [f64; 2],
}

impl<'a> Stiffness<'a> {
    pub fn contrast(coef: &'a CoefficientField, scale: f64, w: &ContrastWeight) -> Self {
        Stiffness { coef, scale, weights: [1.0, w.delta()] }
    }

    pub fn uniform(coef: &'a CoefficientField, scale: f64) -> Self {
        Stiffness { coef, scale, weights: [1.0, 1.0] }
    }

    pub fn only(coef: &'a CoefficientField, scale: f64, region: Region) -> Self {
        let weights = match region {
            Region::Matrix => [1.0, 0.0],
            Region::Inclusion => [0.0, 1.0],
        };
        Stiffness { coef, scale, weights }
    }

    pub fn m(&self) -> usize {
        self.coef.m()
    }

    pub fn weight(&self, region: Region) -> f64 {
        match region {
            Region::Matrix => self.weights[0],
            Region::Inclusion => self.weights[1],
        }
    }

    /// Weighted element average of A over the quadrature points, into `out`
    /// ((2m)² entries); returns false if the element carries zero weight.
    pub fn element_tensor(&self, mesh: &Mesh, e: usize, scratch: &mut [f64], out: &mut [f64]) -> bool {
        let w = self.weight(mesh.region[e]);
        if w == 0.0 {
            return false;
        }
        out.fill(0.0);
        for x in quad_points(mesh, e) {
            self.coef.evaluate_into([x[0] / self.scale, x[1] / self.scale], scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
        let f = w / 3.0;
        for o in out.iter_mut() {
            *o *= f;
        }
        true
    }

    /// Local matrix over the 3m element DOFs (index `a*m + α`).
    pub fn element_matrix(&self, mesh: &Mesh, e: usize, scratch: &mut Scratch) -> bool {
        let m = self.m();
        if !self.element_tensor(mesh, e, &mut scratch.eval, &mut scratch.tensor) {
            return false;
        }
        let (area, g) = mesh.basis_gradients(e);
        let t = &scratch.tensor;
        let k = &mut scratch.local;
        for a in 0..3 {
            for al in 0..m {
                for b in 0..3 {
                    for be in 0..m {
                        let mut s = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                s += t[tensor_index(m, i, al, j, be)] * g[a][i] * g[b][j];
                            }
                        }
                        k[(a * m + al) * 3 * m + b * m + be] = area * s;
                    }
                }
            }
        }
        true
    }
}

pub struct Scratch {
    eval: Vec<f64>,
    tensor: Vec<f64>,
    pub local: Vec<f64>,
}

impl Scratch {
    pub fn new(m: usize) -> Self {
        Scratch { eval: vec![0.0; 4 * m * m], tensor: vec![0.0; 4 * m * m], local: vec![0.0; 9 * m * m] }
    }
}

fn check_layout(mesh: &Mesh, m: usize, cons: &Constraints) -> Result<()> {
    if cons.m() != m || cons.n_nodal() != mesh.n_vertices() * m {
        return Err(LabError::Constraints(format!(
            "constraints cover {} DOFs with m = {}, mesh needs {} with m = {m}",
            cons.n_nodal(),
            cons.m(),
            mesh.n_vertices() * m
        )));
    }
    Ok(())
}

/// Reduced matrix Pᵀ K P.
pub fn assemble_matrix(mesh: &Mesh, stiff: &Stiffness, cons: &Constraints) -> Result<CsrMatrix> {
    let m = stiff.m();
    check_layout(mesh, m, cons)?;
    let n = cons.n_reduced();
    let dofs = 3 * m;
    Ok(CsrMatrix::from_generator(n, |emit| {
        let mut scratch = Scratch::new(m);
        let mut slots = vec![None; dofs];
        for e in 0..mesh.n_elements() {
            if !stiff.element_matrix(mesh, e, &mut scratch) {
                continue;
            }
            let el = mesh.elements[e];
            for a in 0..3 {
                for al in 0..m {
                    slots[a * m + al] = cons.slot(el[a] * m + al);
                }
            }
            for p in 0..dofs {
                let Some(r) = slots[p] else { continue };
                for q in 0..dofs {
                    if let Some(c) = slots[q] {
                        emit(r, c, scratch.local[p * dofs + q]);
                    }
                }
            }
        }
    }))
}

/// Matrix-free K x on the nodal DOF vector.
pub fn apply_stiffness(mesh: &Mesh, stiff: &Stiffness, x: &[f64]) -> Vec<f64> {
    let m = stiff.m();
    let dofs = 3 * m;
    let mut y = vec![0.0; mesh.n_vertices() * m];
    let mut scratch = Scratch::new(m);
    let mut loc = vec![0.0; dofs];
    for e in 0..mesh.n_elements() {
        if !stiff.element_matrix(mesh, e, &mut scratch) {
            continue;
        }
        let el = mesh.elements[e];
        for a in 0..3 {
            for al in 0..m {
                loc[a * m + al] = x[el[a] * m + al];
            }
        }
        for p in 0..dofs {
            let s: f64 = (0..dofs).map(|q| scratch.local[p * dofs + q] * loc[q]).sum();
            y[el[p / m] * m + p % m] += s;
        }
    }
    y
}

/// Nodal load ∫ f·φ with f sampled at the quadrature points.
pub fn load_vector(mesh: &Mesh, m: usize, f: impl Fn([f64; 2], Region, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices() * m];
    let mut fv = vec![0.0; m];
    for e in 0..mesh.n_elements() {
        let area = mesh.area(e);
        let el = mesh.elements[e];
        for (q, x) in quad_points(mesh, e).iter().enumerate() {
            f(*x, mesh.region[e], &mut fv);
            for a in 0..3 {
                let w = area / 3.0 * QUAD_BARY[q][a];
                for al in 0..m {
                    out[el[a] * m + al] += w * fv[al];
                }
            }
        }
    }
    out
}

/// Nodal load ∫ G : ∇φ for an elementwise-constant G (entries `i*m + α`).
pub fn flux_load(mesh: &Mesh, m: usize, g: impl Fn(usize, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices() * m];
    let mut gv = vec![0.0; 2 * m];
    for e in 0..mesh.n_elements() {
        gv.fill(0.0);
        g(e, &mut gv);
        if gv.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (area, grad) = mesh.basis_gradients(e);
        let el = mesh.elements[e];
        for a in 0..3 {
            for al in 0..m {
                out[el[a] * m + al] += area * (gv[al] * grad[a][0] + gv[m + al] * grad[a][1]);
            }
        }
    }
    out
}

/// Constrained system Pᵀ K P z = Pᵀ (F − K x₀).
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Constraints,
    pub mesh: Arc<Mesh>,
}

impl LinearSystem {
    pub fn m(&self) -> usize {
        self.constraints.m()
    }
}

/// Reduced right-hand side for nodal load `load` under `cons`.
pub fn reduced_rhs(mesh: &Mesh, stiff: &Stiffness, load: &[f64], cons: &Constraints) -> Vec<f64> {
    if cons.offset().iter().all(|&v| v == 0.0) {
        return cons.reduce(load);
    }
    let lift = apply_stiffness(mesh, stiff, cons.offset());
    let r: Vec<f64> = load.iter().zip(&lift).map(|(f, k)| f - k).collect();
    cons.reduce(&r)
}

/// Assembles ∫ Λ A(x/scale) ∇u·∇v = ∫ f·v under the given constraints.
pub fn assemble(
    mesh: &Arc<Mesh>,
    coef: &CoefficientField,
    scale: f64,
    w: &ContrastWeight,
    f: Option<&dyn Fn([f64; 2], Region, &mut [f64])>,
    constraints: Constraints,
) -> Result<LinearSystem> {
    let stiff = Stiffness::contrast(coef, scale, w);
    let matrix = assemble_matrix(mesh, &stiff, &constraints)?;
    let m = coef.m();
    let load = match f {
        Some(f) => load_vector(mesh, m, f),
        None => vec![0.0; mesh.n_vertices() * m],
    };
    let rhs = reduced_rhs(mesh, &stiff, &load, &constraints);
    Ok(LinearSystem { matrix, rhs, constraints, mesh: mesh.clone() })
}
