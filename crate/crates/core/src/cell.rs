//! Cell correctors across the contrast range, their soft and stiff limits,
//! and homogenized tensors.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::experiments::rate::{fit_rate, RateReport};
use crate::fem::{
    apply_stiffness, assemble_matrix, flux_load, tensor_index, CoefficientField, ConstraintKind, Constraints,
    ElementFilter, Factorized, FemFunction, SolverOptions, Stiffness,
};
use crate::geometry::{build_cell_mesh, CellMesh, InclusionShape, Region};

/// Contrast of a corrector family; `Finite(1.0)` is the unit-contrast case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeltaTag {
    Finite(f64),
    Zero,
    Infinity,
}

impl fmt::Display for DeltaTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaTag::Finite(d) => write!(f, "{d}"),
            DeltaTag::Zero => write!(f, "zero"),
            DeltaTag::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for DeltaTag {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(DeltaTag::Zero),
            "inf" | "infinity" => Ok(DeltaTag::Infinity),
            other => {
                let d: f64 = other.parse().map_err(|_| LabError::invalid(format!("bad contrast `{other}`")))?;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(LabError::invalid(format!("contrast must be in (0, inf), got {d}")));
                }
                Ok(DeltaTag::Finite(d))
            }
        }
    }
}

/// χ_j^β for all (j, β), each an m-component torus field, stored at `j*m + β`.
#[derive(Clone, Debug)]
pub struct CellCorrectors {
    pub tag: DeltaTag,
    pub cell: Arc<CellMesh>,
    pub coef: CoefficientField,
    pub chi: Vec<FemFunction>,
    /// Interior second-order correctors (stiff limit only), zero-mean on ω.
    pub w: Option<Vec<FemFunction>>,
}

impl CellCorrectors {
    pub fn m(&self) -> usize {
        self.coef.m()
    }

    pub fn chi(&self, j: usize, beta: usize) -> &FemFunction {
        &self.chi[j * self.m() + beta]
    }

    /// Full H1(Y) norm per corrector, in storage order.
    pub fn chi_norms(&self) -> Vec<f64> {
        self.chi.iter().map(|c| c.norms(&ElementFilter::All).h1()).collect()
    }

    /// (Σ_{j,β} ‖χ_j^β − χ'_j^β‖²_{H1(Y)})^{1/2}.
    pub fn h1_distance(&self, other: &CellCorrectors) -> Result<f64> {
        self.distance_by(other, |d| {
            let n = d.norms(&ElementFilter::All);
            n.l2 * n.l2 + n.h1_semi * n.h1_semi
        })
    }

    /// (Σ ‖∇(χ_j^β − χ'_j^β)‖²_{L2(region)})^{1/2}.
    pub fn gradient_distance(&self, other: &CellCorrectors, region: Region) -> Result<f64> {
        self.distance_by(other, |d| d.norms(&ElementFilter::Region(region)).h1_semi.powi(2))
    }

    /// (Σ ‖∇(χ_δ − χ_∞ − (δ−1)⁻¹w)‖²_{L2(ω)})^{1/2}: what is left of a finite
    /// contrast family after the stiff limit and its interior correction.
    pub fn second_order_defect(&self, stiff: &CellCorrectors) -> Result<f64> {
        let d = match self.tag {
            DeltaTag::Finite(d) if d > 1.0 => d,
            _ => return Err(LabError::invalid("second-order defect needs a finite contrast above 1")),
        };
        let w = stiff
            .w
            .as_ref()
            .ok_or_else(|| LabError::invalid("second-order defect needs the stiff-limit family"))?;
        if self.chi.len() != stiff.chi.len() {
            return Err(LabError::invalid("corrector families of different size"));
        }
        let mut s = 0.0;
        for ((a, b), wk) in self.chi.iter().zip(&stiff.chi).zip(w) {
            let mut diff = a.difference(b)?;
            diff.axpy(-1.0 / (d - 1.0), wk)?;
            s += diff.norms(&ElementFilter::Region(Region::Inclusion)).h1_semi.powi(2);
        }
        Ok(s.sqrt())
    }

    fn distance_by(&self, other: &CellCorrectors, f: impl Fn(&FemFunction) -> f64) -> Result<f64> {
        if self.chi.len() != other.chi.len() {
            return Err(LabError::invalid("corrector families of different size"));
        }
        let mut s = 0.0;
        for (a, b) in self.chi.iter().zip(&other.chi) {
            s += f(&a.difference(b)?);
        }
        Ok(s.sqrt())
    }
}

/// Effective tensor â_{ij}^{αβ} as a (2m)×(2m) matrix (row (i,α), column (j,β)).
#[derive(Clone, Debug, Serialize)]
pub struct HomogenizedTensor {
    pub tag: DeltaTag,
    pub m: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    /// Smallest eigenvalue of the symmetric part: a certified ellipticity bound.
    pub mu1: f64,
}

impl HomogenizedTensor {
    pub fn new(tag: DeltaTag, m: usize, entries: Vec<f64>) -> Self {
        let n = 2 * m;
        let a = DMatrix::from_row_slice(n, n, &entries);
        let sym = (&a + a.transpose()) * 0.5;
        let mu1 = sym.symmetric_eigenvalues().min();
        HomogenizedTensor { tag, m, entries, mu1 }
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    pub fn get(&self, i: usize, alpha: usize, j: usize, beta: usize) -> f64 {
        self.entries[tensor_index(self.m, i, alpha, j, beta)]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.entries)
    }

    pub fn symmetry_defect(&self) -> f64 {
        let a = self.matrix();
        (&a - a.transpose()).abs().max()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let a = self.matrix();
        let mut e: Vec<f64> = ((&a + a.transpose()) * 0.5).symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                s += xi[p] * self.entries[p * n + q] * xi[q];
            }
        }
        s
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &HomogenizedTensor) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    /// Constant coefficient field with these entries.
    pub fn as_coefficient(&self) -> CoefficientField {
        let entries = self.entries.clone();
        let n = self.dim();
        let sym = (0..n).all(|p| (0..n).all(|q| (entries[p * n + q] - entries[q * n + p]).abs() <= 1e-10));
        let eig = self.eigenvalues();
        let mu = eig[0].min(1.0 / eig[n - 1]);
        CoefficientField::from_fn(self.m, mu, sym, "homogenized", move |_, out| out.copy_from_slice(&entries))
    }
}

/// Cell-problem driver bound to one mesh and coefficient; every family of
/// 2m right-hand sides shares one factorization.
pub struct CellSolver {
    pub cell: Arc<CellMesh>,
    pub coef: CoefficientField,
    pub opts: SolverOptions,
    /// Unweighted element averages of A.
    tensors: Vec<f64>,
}

impl CellSolver {
    pub fn new(coef: CoefficientField, shape: InclusionShape, n: usize, opts: SolverOptions) -> Result<Self> {
        Self::from_mesh(Arc::new(build_cell_mesh(shape, n)?), coef, opts)
    }

    pub fn from_mesh(cell: Arc<CellMesh>, coef: CoefficientField, opts: SolverOptions) -> Result<Self> {
        let mesh = &cell.mesh;
        let t = coef.tensor_len();
        let mut tensors = vec![0.0; mesh.n_elements() * t];
        let mut scratch = vec![0.0; t];
        let stiff = Stiffness::uniform(&coef, 1.0);
        for e in 0..mesh.n_elements() {
            stiff.element_tensor(mesh, e, &mut scratch, &mut tensors[e * t..(e + 1) * t]);
        }
        Ok(CellSolver { cell, coef, opts, tensors })
    }

    pub fn m(&self) -> usize {
        self.coef.m()
    }

    /// Element average of A (unweighted).
    pub fn element_tensor(&self, e: usize) -> &[f64] {
        let t = self.coef.tensor_len();
        &self.tensors[e * t..(e + 1) * t]
    }

    /// Nodal vector of −∫ w(region) A e_j^β · ∇v.
    fn flux_rhs(&self, weights: [f64; 2], j: usize, beta: usize) -> Vec<f64> {
        let m = self.m();
        let mesh = &self.cell.mesh;
        flux_load(mesh, m, |e, out| {
            let w = match mesh.region[e] {
                Region::Matrix => weights[0],
                Region::Inclusion => weights[1],
            };
            if w == 0.0 {
                return;
            }
            let a = self.element_tensor(e);
            for i in 0..2 {
                for al in 0..m {
                    out[i * m + al] = -w * a[tensor_index(m, i, al, j, beta)];
                }
            }
        })
    }

    fn field(&self, values: Vec<f64>) -> Result<FemFunction> {
        FemFunction::new(self.cell.mesh.clone(), self.m(), values)
    }

    /// Solve for every (j, β) with one factorization; `offset_for` may replace
    /// the fixed values of constrained DOFs per right-hand side.
    fn solve_family(
        &self,
        weights: [f64; 2],
        base: &Constraints,
        offset_for: impl Fn(usize, usize) -> Option<Vec<f64>>,
    ) -> Result<Vec<FemFunction>> {
        let m = self.m();
        let stiff = Stiffness { coef: &self.coef, scale: 1.0, weights };
        let matrix = assemble_matrix(&self.cell.mesh, &stiff, base)?;
        let fact = Factorized::new(matrix, self.opts)?;
        let mut out = Vec::with_capacity(2 * m);
        for j in 0..2 {
            for beta in 0..m {
                let mut load = self.flux_rhs(weights, j, beta);
                let cons = match offset_for(j, beta) {
                    Some(off) => {
                        let lift = apply_stiffness(&self.cell.mesh, &stiff, &off);
                        for (l, k) in load.iter_mut().zip(&lift) {
                            *l -= k;
                        }
                        base.with_offset(off)?
                    }
                    None => base.clone(),
                };
                let z = fact.solve(&cons.reduce(&load))?;
                out.push(self.field(cons.expand(&z))?);
            }
        }
        Ok(out)
    }

    /// Weighted periodic cell problem ∫ w A ∇(χ + y_j e^β)·∇v = 0, mean zero.
    fn solve_weighted(&self, weights: [f64; 2]) -> Result<Vec<FemFunction>> {
        let cons = Constraints::periodic(&self.cell.periodic_map, self.m(), true);
        let mut chi = self.solve_family(weights, &cons, |_, _| None)?;
        for c in &mut chi {
            c.remove_mean();
        }
        Ok(chi)
    }

    pub fn solve(&self, delta: f64) -> Result<CellCorrectors> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(LabError::invalid(format!("contrast must be in (0, inf), got {delta}")));
        }
        let chi = self.solve_weighted([1.0, delta])?;
        Ok(CellCorrectors { tag: DeltaTag::Finite(delta), cell: self.cell.clone(), coef: self.coef.clone(), chi, w: None })
    }

    pub fn solve_tag(&self, tag: DeltaTag) -> Result<CellCorrectors> {
        match tag {
            DeltaTag::Finite(d) => self.solve(d),
            DeltaTag::Zero => self.solve_zero(),
            DeltaTag::Infinity => self.solve_infinity(),
        }
    }

    /// Periodic constraints restricted to vertices flagged in `keep`, with
    /// the first kept master pinned.
    fn restricted_periodic(&self, keep: &[bool]) -> Result<Constraints> {
        let m = self.m();
        let map = &self.cell.periodic_map;
        let nv = map.len();
        let mut master_slot = vec![usize::MAX; nv];
        let mut next = 0;
        let mut pinned = false;
        for v in 0..nv {
            if map[v] == v && keep[v] {
                if !pinned {
                    pinned = true;
                    continue;
                }
                master_slot[v] = next;
                next += m;
            }
        }
        let mut slot = vec![None; nv * m];
        for v in 0..nv {
            let mv = map[v];
            if keep[v] && master_slot[mv] != usize::MAX {
                for a in 0..m {
                    slot[v * m + a] = Some(master_slot[mv] + a);
                }
            }
        }
        Constraints::from_parts(m, slot, vec![0.0; nv * m], ConstraintKind::Custom)
    }

    /// Soft limit: the matrix-region problem with natural conditions on ∂ω,
    /// extended A-harmonically (for χ + y_j e^β) into ω, then mean zero on Y.
    pub fn solve_zero(&self) -> Result<CellCorrectors> {
        let m = self.m();
        let mesh = &self.cell.mesh;
        let outer = mesh.vertices_touching(Region::Matrix);
        let cons = self.restricted_periodic(&outer)?;
        let exterior = self.solve_family([1.0, 0.0], &cons, |_, _| None)?;

        // Interior: vertices of ω not on the interface are free; everything
        // else is fixed to the exterior values.
        let nv = mesh.n_vertices();
        let mut slot = vec![None; nv * m];
        let mut next = 0;
        for v in 0..nv {
            if !outer[v] {
                for a in 0..m {
                    slot[v * m + a] = Some(next);
                    next += 1;
                }
            }
        }
        let inner = Constraints::from_parts(m, slot, vec![0.0; nv * m], ConstraintKind::Custom)?;
        let chi = if next == 0 {
            exterior
        } else {
            let mut filled = self.solve_family([0.0, 1.0], &inner, |j, beta| Some(exterior[j * m + beta].values().to_vec()))?;
            for c in &mut filled {
                c.remove_mean();
            }
            filled
        };
        Ok(CellCorrectors { tag: DeltaTag::Zero, cell: self.cell.clone(), coef: self.coef.clone(), chi, w: None })
    }

    /// Stiff limit: χ + y_j e^β is tied to one unknown constant per component
    /// on the closed inclusion. Also builds the interior correctors w_j^β.
    pub fn solve_infinity(&self) -> Result<CellCorrectors> {
        let m = self.m();
        let mesh = &self.cell.mesh;
        let nv = mesh.n_vertices();
        let closed = mesh.vertices_touching(Region::Inclusion);
        let map = &self.cell.periodic_map;

        let mut master_slot = vec![usize::MAX; nv];
        let mut next = 0;
        let mut pinned = false;
        for v in 0..nv {
            if map[v] == v && !closed[v] {
                if !pinned {
                    pinned = true;
                    continue;
                }
                master_slot[v] = next;
                next += m;
            }
        }
        let aggregate = next;
        let mut slot = vec![None; nv * m];
        for v in 0..nv {
            for a in 0..m {
                slot[v * m + a] = if closed[v] {
                    Some(aggregate + a)
                } else if master_slot[map[v]] != usize::MAX {
                    Some(master_slot[map[v]] + a)
                } else {
                    None
                };
            }
        }
        let base = Constraints::from_parts(m, slot, vec![0.0; nv * m], ConstraintKind::Custom)?;
        let rigid_offset = |j: usize, beta: usize| {
            let mut off = vec![0.0; nv * m];
            for v in 0..nv {
                if closed[v] {
                    off[v * m + beta] = -mesh.vertices[v][j];
                }
            }
            Some(off)
        };
        let mut chi = self.solve_family([1.0, 0.0], &base, rigid_offset)?;
        for c in &mut chi {
            c.remove_mean();
        }
        let w = self.interior_correctors(&chi, &closed)?;
        Ok(CellCorrectors { tag: DeltaTag::Infinity, cell: self.cell.clone(), coef: self.coef.clone(), chi, w: Some(w) })
    }

    /// Interface functional −∫_{Y∖ω} A∇(χ_∞ + y_j e^β)·∇v on closed-inclusion
    /// test functions, per (j, β).
    pub fn interface_datum(&self, chi_inf: &FemFunction, j: usize, beta: usize) -> Vec<f64> {
        let stiff = Stiffness::only(&self.coef, 1.0, Region::Matrix);
        let k_chi = apply_stiffness(&self.cell.mesh, &stiff, chi_inf.values());
        let b = self.flux_rhs([1.0, 0.0], j, beta);
        k_chi.iter().zip(&b).map(|(k, f)| -(k - f)).collect()
    }

    fn interior_correctors(&self, chi: &[FemFunction], closed: &[bool]) -> Result<Vec<FemFunction>> {
        let m = self.m();
        let mesh = &self.cell.mesh;
        let nv = mesh.n_vertices();
        let mut slot = vec![None; nv * m];
        let mut next = 0;
        let mut pinned = false;
        for v in 0..nv {
            if closed[v] {
                if !pinned {
                    pinned = true;
                    continue;
                }
                for a in 0..m {
                    slot[v * m + a] = Some(next + a);
                }
                next += m;
            }
        }
        // One pinned vertex removes the constants of each component.
        let cons = Constraints::from_parts(m, slot, vec![0.0; nv * m], ConstraintKind::Custom)?;
        let stiff = Stiffness::only(&self.coef, 1.0, Region::Inclusion);
        let fact = Factorized::new(assemble_matrix(mesh, &stiff, &cons)?, self.opts)?;
        let incl_area = mesh.region_area(Region::Inclusion);
        let mut out = Vec::with_capacity(2 * m);
        for j in 0..2 {
            for beta in 0..m {
                let mut datum = self.interface_datum(&chi[j * m + beta], j, beta);
                let mut scale = 0.0f64;
                let mut total = vec![0.0; m];
                for v in 0..nv {
                    for a in 0..m {
                        if closed[v] {
                            total[a] += datum[v * m + a];
                            scale = scale.max(datum[v * m + a].abs());
                        } else {
                            datum[v * m + a] = 0.0;
                        }
                    }
                }
                let compat = total.iter().fold(0.0f64, |s, t| s.max(t.abs()));
                if compat > 1e-8 {
                    return Err(LabError::Compatibility(compat));
                }
                let z = fact.solve(&cons.reduce(&datum))?;
                let mut w = self.field(cons.expand(&z))?;
                // Zero mean over ω.
                let mut mean = vec![0.0; m];
                for e in 0..mesh.n_elements() {
                    if mesh.region[e] == Region::Inclusion {
                        let area = mesh.area(e);
                        for (a, mv) in mean.iter_mut().enumerate() {
                            *mv += area / 3.0 * mesh.elements[e].iter().map(|&v| w.value(v, a)).sum::<f64>();
                        }
                    }
                }
                let mut values = w.into_values();
                for v in 0..nv {
                    for a in 0..m {
                        values[v * m + a] = if closed[v] { values[v * m + a] - mean[a] / incl_area } else { 0.0 };
                    }
                }
                w = self.field(values)?;
                out.push(w);
            }
        }
        Ok(out)
    }

    /// Compatibility residual max_{j,β,α} |Σ_{p ∈ ω̄} datum_p^α| of the stiff limit.
    pub fn compatibility_residual(&self, cc: &CellCorrectors) -> Result<f64> {
        if cc.tag != DeltaTag::Infinity {
            return Err(LabError::invalid("compatibility residual needs the stiff-limit correctors"));
        }
        let m = self.m();
        let closed = self.cell.mesh.vertices_touching(Region::Inclusion);
        let mut worst = 0.0f64;
        for j in 0..2 {
            for beta in 0..m {
                let d = self.interface_datum(cc.chi(j, beta), j, beta);
                for a in 0..m {
                    let s: f64 = (0..closed.len()).filter(|&v| closed[v]).map(|v| d[v * m + a]).sum();
                    worst = worst.max(s.abs());
                }
            }
        }
        Ok(worst)
    }

    /// Effective tensor of a corrector family.
    pub fn homogenized(&self, cc: &CellCorrectors) -> HomogenizedTensor {
        let m = self.m();
        let n = 2 * m;
        let mesh = &self.cell.mesh;
        let weights = match cc.tag {
            DeltaTag::Finite(d) => [1.0, d],
            DeltaTag::Zero | DeltaTag::Infinity => [1.0, 0.0],
        };
        let mut entries = vec![0.0; n * n];
        let mut grad = vec![0.0; n];
        for e in 0..mesh.n_elements() {
            let w = match mesh.region[e] {
                Region::Matrix => weights[0],
                Region::Inclusion => weights[1],
            };
            if w == 0.0 {
                continue;
            }
            let a = self.element_tensor(e);
            let area = mesh.area(e);
            for j in 0..2 {
                for beta in 0..m {
                    cc.chi(j, beta).element_gradient(e, &mut grad);
                    for i in 0..2 {
                        for al in 0..m {
                            let mut s = a[tensor_index(m, i, al, j, beta)];
                            for k in 0..2 {
                                for g in 0..m {
                                    s += a[tensor_index(m, i, al, k, g)] * grad[g * 2 + k];
                                }
                            }
                            entries[tensor_index(m, i, al, j, beta)] += w * area * s;
                        }
                    }
                }
            }
        }
        if let (DeltaTag::Infinity, Some(ws)) = (cc.tag, &cc.w) {
            for e in 0..mesh.n_elements() {
                if mesh.region[e] != Region::Inclusion {
                    continue;
                }
                let a = self.element_tensor(e);
                let area = mesh.area(e);
                for j in 0..2 {
                    for beta in 0..m {
                        ws[j * m + beta].element_gradient(e, &mut grad);
                        for i in 0..2 {
                            for al in 0..m {
                                let mut s = 0.0;
                                for k in 0..2 {
                                    for g in 0..m {
                                        s += a[tensor_index(m, i, al, k, g)] * grad[g * 2 + k];
                                    }
                                }
                                entries[tensor_index(m, i, al, j, beta)] += area * s;
                            }
                        }
                    }
                }
            }
        }
        HomogenizedTensor::new(cc.tag, m, entries)
    }

    /// Largest relative residual ‖Pᵀ(Kχ − F)‖ / ‖PᵀF‖ of the finite-contrast
    /// cell equations against all periodic test hats.
    pub fn weak_residual(&self, cc: &CellCorrectors) -> Result<f64> {
        let DeltaTag::Finite(delta) = cc.tag else {
            return Err(LabError::invalid("weak residual is defined for finite contrast"));
        };
        let m = self.m();
        let cons = Constraints::periodic(&self.cell.periodic_map, m, false);
        let stiff = Stiffness { coef: &self.coef, scale: 1.0, weights: [1.0, delta] };
        let mut worst = 0.0f64;
        for j in 0..2 {
            for beta in 0..m {
                let f = cons.reduce(&self.flux_rhs([1.0, delta], j, beta));
                let k = cons.reduce(&apply_stiffness(&self.cell.mesh, &stiff, cc.chi(j, beta).values()));
                let num: f64 = k.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                if den > 0.0 {
                    worst = worst.max(num / den);
                }
            }
        }
        Ok(worst)
    }

    pub fn sweep(&self, deltas: &[f64]) -> Result<TensorSweep> {
        let zero = self.homogenized(&self.solve_zero()?);
        let inf = self.homogenized(&self.solve_infinity()?);
        let mut tensors = Vec::with_capacity(deltas.len());
        for &d in deltas {
            tensors.push(self.homogenized(&self.solve(d)?));
        }
        let min_eigs: Vec<f64> = tensors.iter().map(|t| t.mu1).collect();
        let soft: Vec<(f64, f64)> = deltas
            .iter()
            .zip(&tensors)
            .filter(|(d, _)| **d < 1.0)
            .map(|(d, t)| (*d, t.distance(&zero)))
            .collect();
        let stiff: Vec<(f64, f64)> = deltas
            .iter()
            .zip(&tensors)
            .filter(|(d, _)| **d > 1.0)
            .map(|(d, t)| (1.0 / d, t.distance(&inf)))
            .collect();
        Ok(TensorSweep {
            deltas: deltas.to_vec(),
            min_eigs,
            soft_rate: fit_rate(&soft).ok(),
            stiff_rate: fit_rate(&stiff).ok(),
            tensors,
            zero,
            infinity: inf,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorSweep {
    pub deltas: Vec<f64>,
    pub tensors: Vec<HomogenizedTensor>,
    pub min_eigs: Vec<f64>,
    /// |Â_δ − Â_0| against δ over the δ < 1 part of the grid.
    pub soft_rate: Option<RateReport>,
    /// |Â_δ − Â_∞| against 1/δ over the δ > 1 part of the grid.
    pub stiff_rate: Option<RateReport>,
    pub zero: HomogenizedTensor,
    pub infinity: HomogenizedTensor,
}

pub fn solve_cell(coef: &CoefficientField, shape: InclusionShape, n: usize, delta: f64) -> Result<CellCorrectors> {
    CellSolver::new(coef.clone(), shape, n, SolverOptions::default())?.solve(delta)
}

pub fn solve_cell_limit_zero(coef: &CoefficientField, shape: InclusionShape, n: usize) -> Result<CellCorrectors> {
    CellSolver::new(coef.clone(), shape, n, SolverOptions::default())?.solve_zero()
}

pub fn solve_cell_limit_infinity(coef: &CoefficientField, shape: InclusionShape, n: usize) -> Result<CellCorrectors> {
    CellSolver::new(coef.clone(), shape, n, SolverOptions::default())?.solve_infinity()
}

/// Effective tensor from a solved family (the contrast is taken from its tag).
pub fn homogenized_tensor(cc: &CellCorrectors) -> HomogenizedTensor {
    let solver = CellSolver::from_mesh(cc.cell.clone(), cc.coef.clone(), SolverOptions::default())
        .expect("cell mesh and coefficient already validated");
    solver.homogenized(cc)
}

/// Log-spaced grid from 10^a to 10^b with `count` points.
pub fn log_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![10f64.powf(a)];
    }
    (0..count).map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ: InclusionShape = InclusionShape::Square { r: 0.25 };

    fn solver(n: usize) -> CellSolver {
        CellSolver::new(CoefficientField::identity(1), SQ, n, SolverOptions::default()).unwrap()
    }

    #[test]
    fn unit_contrast_identity_gives_zero_corrector() {
        let s = solver(16);
        let cc = s.solve(1.0).unwrap();
        for c in &cc.chi {
            assert!(c.values().iter().all(|v| v.abs() < 1e-12));
        }
        let t = s.homogenized(&cc);
        assert!((t.get(0, 0, 0, 0) - 1.0).abs() < 1e-12 && t.get(0, 0, 1, 0).abs() < 1e-12);
    }

    #[test]
    fn correctors_are_mean_zero_and_periodic() {
        let s = solver(16);
        for cc in [s.solve(7.0).unwrap(), s.solve_zero().unwrap(), s.solve_infinity().unwrap()] {
            for c in &cc.chi {
                assert!(c.integral()[0].abs() < 1e-12, "{}", cc.tag);
                for (v, &mv) in s.cell.periodic_map.iter().enumerate() {
                    assert_eq!(c.value(v, 0), c.value(mv, 0));
                }
            }
        }
    }

    #[test]
    fn rigid_constraint_holds() {
        let s = solver(16);
        let cc = s.solve_infinity().unwrap();
        let closed = s.cell.mesh.vertices_touching(Region::Inclusion);
        let vals: Vec<f64> = (0..closed.len())
            .filter(|&v| closed[v])
            .map(|v| cc.chi(0, 0).value(v, 0) + s.cell.mesh.vertices[v][0])
            .collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-10);
        assert!(s.compatibility_residual(&cc).unwrap() < 1e-8);
    }

    #[test]
    fn odd_symmetry_in_first_coordinate() {
        let s = solver(16);
        let cc = s.solve(5.0).unwrap();
        let mesh = &s.cell.mesh;
        let chi = cc.chi(0, 0);
        for (v, p) in mesh.vertices.iter().enumerate() {
            let w = mesh
                .vertices
                .iter()
                .position(|q| (q[0] + p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12)
                .unwrap();
            assert!((chi.value(v, 0) + chi.value(w, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn delta_tag_parsing() {
        assert_eq!("zero".parse::<DeltaTag>().unwrap(), DeltaTag::Zero);
        assert_eq!("inf".parse::<DeltaTag>().unwrap(), DeltaTag::Infinity);
        assert_eq!("2.5".parse::<DeltaTag>().unwrap(), DeltaTag::Finite(2.5));
        assert!("-1".parse::<DeltaTag>().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(-4.0, 4.0, 9);
        assert_eq!(g.len(), 9);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[8] - 1e4).abs() < 1e-9 && (g[4] - 1.0).abs() < 1e-15);
    }
}
