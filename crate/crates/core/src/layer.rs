//! Variational single-layer potential on the torus and the associated
//! Neumann–Poincaré operator, in a discrete form where densities live on the
//! interface vertices and pair with traces through the interface mass matrix.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::cell::{CellCorrectors, CellSolver, DeltaTag};
use crate::error::{LabError, Result};
use crate::fem::{
    apply_stiffness, assemble_matrix, CoefficientField, Constraints, Factorized, FemFunction, SolverOptions, Stiffness,
};
use crate::geometry::{CellMesh, Region};

/// Largest number of density unknowns handled with dense algebra.
pub const MAX_DENSITY_DOFS: usize = 2000;

/// λ = 1/2 + 1/(δ − 1), the resolvent parameter attached to contrast δ.
pub fn lambda_of_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(LabError::invalid(format!("contrast must be in (0, inf), got {delta}")));
    }
    if delta == 1.0 {
        return Err(LabError::invalid("unit contrast has no resolvent representation"));
    }
    Ok(0.5 + 1.0 / (delta - 1.0))
}

/// Nodal density on the interface vertices (m values per vertex).
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceDensity {
    pub values: Vec<f64>,
}

/// Residuals certifying the discrete operator.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LayerChecks {
    /// max |G K − Kᵀ G| / max |G|.
    pub self_adjoint: f64,
    /// max over basis densities of |t₊ − t₋ − M ψ| / |M ψ|.
    pub jump: f64,
    /// Largest relative stiffness residual of Sψ off the interface.
    pub off_interface: f64,
    pub min_gram_eig: f64,
}

pub struct WeakLayerOperator {
    cell: Arc<CellMesh>,
    coef: CoefficientField,
    opts: SolverOptions,
    /// Interface vertices, in increasing order.
    nodes: Vec<usize>,
    node_of: HashMap<usize, usize>,
    /// Interface mass matrix over density DOFs (node*m + α).
    mass: DMatrix<f64>,
    mass_chol: Cholesky<f64, nalgebra::Dyn>,
    cons: Constraints,
    fact: Factorized,
    /// Orthonormal basis of the mean-zero densities {ψ : 1ᵀMψ = 0 per component}.
    q: DMatrix<f64>,
    /// K and the H Gram matrix on the mean-zero subspace, in the Q basis.
    k_red: DMatrix<f64>,
    gram: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    checks: LayerChecks,
}

impl WeakLayerOperator {
    pub fn new(cell: Arc<CellMesh>, coef: CoefficientField, opts: SolverOptions) -> Result<Self> {
        let m = coef.m();
        let mesh = cell.mesh.clone();
        let (nodes, edges) = interface_edges(&cell)?;
        let nd = nodes.len() * m;
        if nd > MAX_DENSITY_DOFS {
            return Err(LabError::invalid(format!(
                "{nd} interface density unknowns exceed the dense budget of {MAX_DENSITY_DOFS}"
            )));
        }
        let node_of: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut mass = DMatrix::zeros(nd, nd);
        for (a, b) in edges {
            let pa = mesh.vertices[a];
            let pb = mesh.vertices[b];
            let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            let (ia, ib) = (node_of[&a], node_of[&b]);
            for al in 0..m {
                mass[(ia * m + al, ia * m + al)] += len / 3.0;
                mass[(ib * m + al, ib * m + al)] += len / 3.0;
                mass[(ia * m + al, ib * m + al)] += len / 6.0;
                mass[(ib * m + al, ia * m + al)] += len / 6.0;
            }
        }
        let mass_chol = Cholesky::new(mass.clone()).ok_or_else(|| LabError::Mesh("interface mass matrix singular".into()))?;
        let cons = Constraints::periodic(&cell.periodic_map, m, true);
        let fact = Factorized::new(assemble_matrix(&mesh, &Stiffness::uniform(&coef, 1.0), &cons)?, opts)?;

        // Mean-zero complement: QR of [M·1 per component | I] gives a full
        // orthogonal basis whose leading m columns span the constraints.
        let mut constraint = DMatrix::zeros(nd, m);
        for al in 0..m {
            let mut one = DVector::zeros(nd);
            for k in 0..nodes.len() {
                one[k * m + al] = 1.0;
            }
            constraint.set_column(al, &(&mass * one));
        }
        let mut aug = DMatrix::zeros(nd, nd + m);
        aug.columns_mut(0, m).copy_from(&constraint);
        aug.columns_mut(m, nd).fill_with_identity();
        let q = aug.qr().q().columns(m, nd - m).into_owned();

        let mut op = WeakLayerOperator {
            cell,
            coef,
            opts,
            nodes,
            node_of,
            mass,
            mass_chol,
            cons,
            fact,
            q,
            k_red: DMatrix::zeros(0, 0),
            gram: DMatrix::zeros(0, 0),
            eigenvalues: Vec::new(),
            checks: LayerChecks { self_adjoint: f64::NAN, jump: f64::NAN, off_interface: f64::NAN, min_gram_eig: f64::NAN },
        };
        op.build()?;
        Ok(op)
    }

    pub fn from_shape(coef: CoefficientField, shape: crate::geometry::InclusionShape, n: usize, opts: SolverOptions) -> Result<Self> {
        Self::new(Arc::new(crate::geometry::build_cell_mesh(shape, n)?), coef, opts)
    }

    pub fn m(&self) -> usize {
        self.coef.m()
    }

    pub fn n_density(&self) -> usize {
        self.nodes.len() * self.m()
    }

    pub fn interface_nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// K restricted to mean-zero densities, in the orthonormal basis Q.
    pub fn k_reduced(&self) -> &DMatrix<f64> {
        &self.k_red
    }

    /// Sorted eigenvalues of K on mean-zero densities (self-adjoint in H).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn checks(&self) -> LayerChecks {
        self.checks
    }

    /// Component means ⟨ψ, 1⟩ per α.
    pub fn density_means(&self, psi: &InterfaceDensity) -> Vec<f64> {
        let m = self.m();
        let mp = &self.mass * DVector::from_column_slice(&psi.values);
        (0..m).map(|al| (0..self.nodes.len()).map(|k| mp[k * m + al]).sum()).collect()
    }

    fn embed(&self, density: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut nodal = vec![0.0; self.cell.mesh.n_vertices() * m];
        for (k, &v) in self.nodes.iter().enumerate() {
            nodal[v * m..(v + 1) * m].copy_from_slice(&density[k * m..(k + 1) * m]);
        }
        nodal
    }

    fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; self.n_density()];
        for (k, &v) in self.nodes.iter().enumerate() {
            out[k * m..(k + 1) * m].copy_from_slice(&nodal[v * m..(v + 1) * m]);
        }
        out
    }

    /// Mean-zero torus solution of ∫ A∇u·∇v + ⟨ψ, v⟩ = 0.
    pub fn single_layer(&self, psi: &InterfaceDensity) -> Result<FemFunction> {
        if psi.values.len() != self.n_density() {
            return Err(LabError::invalid(format!(
                "density has {} values, interface carries {}",
                psi.values.len(),
                self.n_density()
            )));
        }
        let scale = psi.values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let bad = self.density_means(psi).into_iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if bad > 1e-10 * scale.max(1.0) {
            return Err(LabError::invalid(format!("density is not mean-zero (⟨ψ,1⟩ = {bad:.3e})")));
        }
        let mp = &self.mass * DVector::from_column_slice(&psi.values);
        let load: Vec<f64> = self.embed(mp.as_slice()).into_iter().map(|x| -x).collect();
        let z = self.fact.solve(&self.cons.reduce(&load))?;
        let mut u = FemFunction::new(self.cell.mesh.clone(), self.m(), self.cons.expand(&z))?;
        u.remove_mean();
        Ok(u)
    }

    /// One-sided conormal trace functionals (t₊ from the matrix side, t₋
    /// from the inclusion side) of a nodal field, per density DOF.
    pub fn traces(&self, nodal: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mesh = &self.cell.mesh;
        let outer = apply_stiffness(mesh, &Stiffness::only(&self.coef, 1.0, Region::Matrix), nodal);
        let inner = apply_stiffness(mesh, &Stiffness::only(&self.coef, 1.0, Region::Inclusion), nodal);
        let plus = self.restrict(&outer).into_iter().map(|x| -x).collect();
        (plus, self.restrict(&inner))
    }

    /// Density M⁻¹t of a trace functional.
    pub fn density_of(&self, functional: &[f64]) -> Vec<f64> {
        self.mass_chol.solve(&DVector::from_column_slice(functional)).as_slice().to_vec()
    }

    /// Kψ = M⁻¹ t₊(Sψ) − ψ/2.
    pub fn apply_np(&self, psi: &InterfaceDensity) -> Result<InterfaceDensity> {
        let s = self.single_layer(psi)?;
        let (plus, _) = self.traces(s.values());
        let mut k = self.density_of(&plus);
        for (x, p) in k.iter_mut().zip(&psi.values) {
            *x -= 0.5 * p;
        }
        Ok(InterfaceDensity { values: k })
    }

    fn build(&mut self) -> Result<()> {
        let nd = self.n_density();
        let r = self.q.ncols();
        let mut sq = Vec::with_capacity(r);
        let mut k_cols = DMatrix::zeros(nd, r);
        let mut jump = 0.0f64;
        let mut off = 0.0f64;
        let mut on_interface = vec![false; self.cell.mesh.n_vertices()];
        for &v in &self.nodes {
            on_interface[v] = true;
        }
        let stiff = Stiffness::uniform(&self.coef, 1.0);
        let m = self.m();
        for c in 0..r {
            let psi = InterfaceDensity { values: self.q.column(c).iter().copied().collect() };
            let s = self.single_layer(&psi)?;
            let (plus, minus) = self.traces(s.values());
            let mp = &self.mass * DVector::from_column_slice(&psi.values);
            let num = plus.iter().zip(&minus).zip(mp.iter()).map(|((a, b), c)| (a - b - c).powi(2)).sum::<f64>().sqrt();
            jump = jump.max(num / mp.norm());
            // Away from the interface Sψ is a discrete solution.
            let ks = self.cons.reduce(&{
                let mut k = apply_stiffness(&self.cell.mesh, &stiff, s.values());
                for (v, flag) in on_interface.iter().enumerate() {
                    if *flag {
                        k[v * m..(v + 1) * m].fill(0.0);
                    }
                }
                k
            });
            let resid = ks.iter().map(|x| x * x).sum::<f64>().sqrt();
            off = off.max(resid / mp.norm());
            let mut k = self.density_of(&plus);
            for (x, p) in k.iter_mut().zip(&psi.values) {
                *x -= 0.5 * p;
            }
            k_cols.set_column(c, &DVector::from_vec(k));
            sq.push(self.restrict(s.values()));
        }
        // G = ∫ A∇SQ·∇SQ = −(MQ)ᵀ (SQ)_Γ.
        let sq_mat = DMatrix::from_fn(nd, r, |i, c| sq[c][i]);
        let mq = &self.mass * &self.q;
        let mut gram = -(mq.transpose() * sq_mat);
        gram = (&gram + gram.transpose()) * 0.5;
        let k_red = self.q.transpose() * &k_cols;
        let gk = &gram * &k_red;
        let defect = (&gk - gk.transpose()).abs().max();
        let chol = Cholesky::new(gram.clone()).ok_or(LabError::GramNotPositive)?;
        let min_gram = gram.clone().symmetric_eigenvalues().min();
        if !(min_gram > 0.0) {
            return Err(LabError::GramNotPositive);
        }
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or(LabError::GramNotPositive)?;
        let b = &linv * &gk * linv.transpose();
        let b = (&b + b.transpose()) * 0.5;
        let mut eig: Vec<f64> = b.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);

        self.checks = LayerChecks {
            self_adjoint: defect / gram.abs().max(),
            jump,
            off_interface: off,
            min_gram_eig: min_gram,
        };
        self.gram = gram;
        self.k_red = k_red;
        self.eigenvalues = eig;
        Ok(())
    }

    /// Operator-norm gap (in the H norm) between the resolvents at λ(δ) and
    /// at the limit point ∓1/2 approached as δ → 0 or δ → ∞.
    pub fn resolvent_gap(&self, delta: f64) -> Result<f64> {
        let lam = lambda_of_delta(delta)?;
        let lim = if delta < 1.0 { -0.5 } else { 0.5 };
        Ok(self
            .eigenvalues
            .iter()
            .map(|&k| (1.0 / (lam - k) - 1.0 / (lim - k)).abs())
            .fold(0.0, f64::max))
    }

    /// Jump density φ of the unit-contrast field y_i e^α + χ₁.
    pub fn unit_density(&self, unit: &CellCorrectors, i: usize, alpha: usize) -> Result<Vec<f64>> {
        if unit.tag != DeltaTag::Finite(1.0) {
            return Err(LabError::invalid("unit density needs the unit-contrast correctors"));
        }
        let m = self.m();
        let mut nodal = unit.chi(i, alpha).values().to_vec();
        for (v, p) in self.cell.mesh.vertices.iter().enumerate() {
            nodal[v * m + alpha] += p[i];
        }
        let (plus, _) = self.traces(&nodal);
        Ok(self.density_of(&plus))
    }

    /// χ_δ = χ₁ + S[(λ(δ) − K)⁻¹ φ] with the mean removed.
    pub fn corrector_via_potentials(&self, unit: &CellCorrectors, delta: f64, i: usize, alpha: usize) -> Result<FemFunction> {
        let lam = lambda_of_delta(delta)?;
        let phi = DVector::from_vec(self.unit_density(unit, i, alpha)?);
        let rhs = self.q.transpose() * phi;
        let r = self.k_red.nrows();
        let sys = DMatrix::identity(r, r) * lam - &self.k_red;
        let c = sys.lu().solve(&rhs).ok_or(LabError::SingularResolvent(lam))?;
        let psi = InterfaceDensity { values: (&self.q * c).as_slice().to_vec() };
        let mut chi = unit.chi(i, alpha).clone();
        chi.axpy(1.0, &self.single_layer(&psi)?)?;
        chi.remove_mean();
        Ok(chi)
    }

    /// Full corrector family at contrast δ via the representation.
    pub fn correctors(&self, delta: f64) -> Result<CellCorrectors> {
        let solver = CellSolver::from_mesh(self.cell.clone(), self.coef.clone(), self.opts)?;
        let unit = solver.solve(1.0)?;
        let m = self.m();
        let mut chi = Vec::with_capacity(2 * m);
        for i in 0..2 {
            for al in 0..m {
                chi.push(self.corrector_via_potentials(&unit, delta, i, al)?);
            }
        }
        Ok(CellCorrectors { tag: DeltaTag::Finite(delta), cell: self.cell.clone(), coef: self.coef.clone(), chi, w: None })
    }

    pub fn is_interface_vertex(&self, v: usize) -> bool {
        self.node_of.contains_key(&v)
    }
}

/// Vertices and edges of ∂ω: edges shared by an inclusion and a matrix element.
fn interface_edges(cell: &CellMesh) -> Result<(Vec<usize>, Vec<(usize, usize)>)> {
    let mesh = &cell.mesh;
    let mut sides: HashMap<(usize, usize), [bool; 2]> = HashMap::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let flags = sides.entry(key).or_default();
            flags[mesh.region[e].code() as usize] = true;
        }
    }
    let mut edges: Vec<(usize, usize)> = sides.into_iter().filter(|(_, f)| f[0] && f[1]).map(|(k, _)| k).collect();
    if edges.is_empty() {
        return Err(LabError::Mesh("cell mesh has no interface".into()));
    }
    edges.sort_unstable();
    let mut nodes: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    Ok((nodes, edges))
}

pub fn np_operator(cell: Arc<CellMesh>, coef: CoefficientField, opts: SolverOptions) -> Result<WeakLayerOperator> {
    WeakLayerOperator::new(cell, coef, opts)
}
