use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::assembly::LinearSystem;
use super::constraints::ConstraintKind;
use super::function::FemFunction;
use super::sparse::CsrMatrix;
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Sparse Cholesky with iterative refinement.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

impl std::str::FromStr for Backend {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "cg" => Ok(Backend::Cg),
            other => Err(LabError::invalid(format!("unknown solver backend `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Target relative residual ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
    /// CG iteration cap (default max(1000, 10 n)).
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { backend: Backend::Direct, tol: 1e-10, max_iter: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

enum Kind {
    Direct(Llt<usize, f64>),
    Jacobi(Vec<f64>),
}

/// A matrix prepared for repeated solves (factorization or preconditioner).
pub struct Factorized {
    matrix: CsrMatrix,
    kind: Kind,
    opts: SolverOptions,
}

const MAX_REFINEMENT: usize = 8;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Factorized {
    pub fn new(matrix: CsrMatrix, opts: SolverOptions) -> Result<Self> {
        let kind = match opts.backend {
            Backend::Direct => {
                let n = matrix.n();
                // Symmetric CSR is its own CSC.
                let symbolic = SymbolicSparseColMat::new_checked(
                    n,
                    n,
                    matrix.row_ptr().to_vec(),
                    None,
                    matrix.col_indices().to_vec(),
                );
                let a = SparseColMat::new(symbolic, matrix.values().to_vec());
                let llt = a
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| LabError::Factorization(format!("{e:?}")))?;
                Kind::Direct(llt)
            }
            Backend::Cg => {
                let d = matrix.diagonal();
                if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                    return Err(LabError::Factorization(format!("non-positive diagonal at row {i}")));
                }
                Kind::Jacobi(d.iter().map(|v| 1.0 / v).collect())
            }
        };
        Ok(Factorized { matrix, kind, opts })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    fn direct_once(llt: &Llt<usize, f64>, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_with_stats(b).map(|(x, _)| x)
    }

    pub fn solve_with_stats(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.n();
        let bn = norm(b);
        if n == 0 || bn == 0.0 {
            return Ok((vec![0.0; n], SolveStats { iterations: 0, residual: 0.0 }));
        }
        match &self.kind {
            Kind::Direct(llt) => {
                let mut x = Self::direct_once(llt, b);
                let mut steps = 0;
                loop {
                    let ax = self.matrix.matvec(&x);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                    let res = norm(&r) / bn;
                    if !res.is_finite() {
                        return Err(LabError::NotConverged { iterations: steps, residual: res });
                    }
                    if res <= self.opts.tol {
                        return Ok((x, SolveStats { iterations: steps, residual: res }));
                    }
                    if steps == MAX_REFINEMENT {
                        return Err(LabError::NotConverged { iterations: steps, residual: res });
                    }
                    let dx = Self::direct_once(llt, &r);
                    for (xi, di) in x.iter_mut().zip(&dx) {
                        *xi += di;
                    }
                    steps += 1;
                }
            }
            Kind::Jacobi(dinv) => self.pcg(b, bn, dinv),
        }
    }

    fn pcg(&self, b: &[f64], bn: f64, dinv: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.n();
        let max_iter = self.opts.max_iter.unwrap_or((10 * n).max(1000));
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(dinv).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut res = 1.0;
        for it in 1..=max_iter {
            self.matrix.matvec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(LabError::NotConverged { iterations: it, residual: res });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            res = norm(&r) / bn;
            if res <= self.opts.tol {
                // Confirm against the true residual.
                let ax = self.matrix.matvec(&x);
                let true_res = norm(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / bn;
                if true_res <= self.opts.tol * 10.0 {
                    return Ok((x, SolveStats { iterations: it, residual: true_res }));
                }
            }
            for i in 0..n {
                z[i] = r[i] * dinv[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(LabError::NotConverged { iterations: max_iter, residual: res })
    }

    /// Spectral condition number estimate from power and inverse iteration.
    pub fn condition_estimate(&self, iterations: usize) -> Result<f64> {
        let n = self.n();
        if n == 0 {
            return Ok(1.0);
        }
        let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
        let mut v = start.clone();
        let mut lmax = 0.0;
        for _ in 0..iterations {
            let w = self.matrix.matvec(&v);
            let nw = norm(&w);
            lmax = dot(&v, &w) / dot(&v, &v);
            v = w.iter().map(|x| x / nw).collect();
        }
        let mut v = start;
        let mut lmin_inv = 0.0;
        for _ in 0..iterations {
            let w = self.solve(&v)?;
            let nw = norm(&w);
            lmin_inv = dot(&v, &w) / dot(&v, &v);
            v = w.iter().map(|x| x / nw).collect();
        }
        Ok(lmax * lmin_inv)
    }
}

/// Solves a constrained system and returns the nodal field. Torus systems
/// with a pinned DOF are shifted to discrete mean zero.
pub fn solve(sys: LinearSystem, opts: SolverOptions) -> Result<FemFunction> {
    let LinearSystem { matrix, rhs, constraints, mesh } = sys;
    let fact = Factorized::new(matrix, opts)?;
    let z = fact.solve(&rhs)?;
    let values = constraints.expand(&z);
    let mut u = FemFunction::new(mesh, constraints.m(), values)?;
    if constraints.kind() == (ConstraintKind::Periodic { pinned: true }) {
        u.remove_mean();
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn identity_solve() {
        for backend in [Backend::Direct, Backend::Cg] {
            let f = Factorized::new(CsrMatrix::identity(4), SolverOptions { backend, ..Default::default() }).unwrap();
            let x = f.solve(&[1.0, 0.0, 0.0, 0.0]).unwrap();
            assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn parabola_nodal_exact() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0, h = 1/8: the 3-point scheme is nodally exact.
        let n = 7;
        let h = 1.0 / 8.0;
        let b = vec![h * h; n];
        for backend in [Backend::Direct, Backend::Cg] {
            let f = Factorized::new(laplacian_1d(n), SolverOptions { backend, ..Default::default() }).unwrap();
            let x = f.solve(&b).unwrap();
            for (i, xi) in x.iter().enumerate() {
                let t = (i + 1) as f64 * h;
                assert!((xi - t * (1.0 - t) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let opts = SolverOptions { backend: Backend::Cg, tol: 1e-14, max_iter: Some(2) };
        let f = Factorized::new(laplacian_1d(50), opts).unwrap();
        match f.solve(&vec![1.0; 50]) {
            Err(LabError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 10.0), (2, 2, 100.0)]);
        let f = Factorized::new(a, SolverOptions::default()).unwrap();
        let c = f.condition_estimate(200).unwrap();
        assert!((c - 100.0).abs() < 1.0);
    }
}
