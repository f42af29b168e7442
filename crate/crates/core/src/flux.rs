//! Flux defect F = Λ(A + A∇χ) − Â and its skew-symmetric potential Ψ,
//! built from torus Poisson potentials h with Δh = F.

use serde::Serialize;

use crate::cell::{CellCorrectors, CellSolver, DeltaTag, HomogenizedTensor};
use crate::error::{LabError, Result};
use crate::fem::{
    assemble_matrix, tensor_index, CoefficientField, Constraints, ElementFilter, Factorized, FemFunction, P0Field,
    SolverOptions, Stiffness,
};
use crate::geometry::Region;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FluxReport {
    pub f_l2: f64,
    pub psi_l2: f64,
    /// max over components and periodic hats v of |∫Ψ_kij ∂_k v + ∫F_ij v| / ‖v‖_{H1}.
    pub div_residual: f64,
    /// max |Ψ_kij + Ψ_ikj|.
    pub skew_residual: f64,
    /// max |∫_Y F|.
    pub f_mean: f64,
    /// L2 norm of ∂_i h_ij about its mean (zero for the continuous construction).
    pub potential_div_variation: f64,
}

pub struct FluxData {
    pub tag: DeltaTag,
    pub m: usize,
    /// (2m)² components per element, indexed like the tensor.
    pub f: P0Field,
    /// h_ij^{αβ}, scalar mean-zero torus fields, indexed like the tensor.
    pub potentials: Vec<FemFunction>,
    /// Ψ_kij^{αβ}: component `k * (2m)² + tensor_index(i, α, j, β)`.
    pub psi: P0Field,
    pub report: FluxReport,
}

impl FluxData {
    pub fn psi_component(&self, e: usize, k: usize, i: usize, alpha: usize, j: usize, beta: usize) -> f64 {
        let t = 4 * self.m * self.m;
        self.psi.element(e)[k * t + tensor_index(self.m, i, alpha, j, beta)]
    }
}

pub fn build_flux(cc: &CellCorrectors, ahat: &HomogenizedTensor, opts: SolverOptions) -> Result<FluxData> {
    let solver = CellSolver::from_mesh(cc.cell.clone(), cc.coef.clone(), opts)?;
    build_flux_with(&solver, cc, ahat)
}

pub fn build_flux_with(solver: &CellSolver, cc: &CellCorrectors, ahat: &HomogenizedTensor) -> Result<FluxData> {
    let weights = match cc.tag {
        DeltaTag::Finite(d) => [1.0, d],
        DeltaTag::Zero => [1.0, 0.0],
        DeltaTag::Infinity => return Err(LabError::invalid("flux corrector needs a finite or soft-limit contrast")),
    };
    let m = cc.m();
    if ahat.m != m {
        return Err(LabError::invalid("homogenized tensor and correctors disagree on m"));
    }
    let mesh = cc.cell.mesh.clone();
    let nt = 4 * m * m;
    let ne = mesh.n_elements();

    let mut f = P0Field::zeros(mesh.clone(), nt);
    let mut grad = vec![0.0; 2 * m];
    for e in 0..ne {
        let w = match mesh.region[e] {
            Region::Matrix => weights[0],
            Region::Inclusion => weights[1],
        };
        let a = solver.element_tensor(e);
        let out = &mut f.values[e * nt..(e + 1) * nt];
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
                        let idx = tensor_index(m, i, al, j, beta);
                        out[idx] = w * s - ahat.entries[idx];
                    }
                }
            }
        }
    }
    let mut f_mean = 0.0f64;
    for c in 0..nt {
        let s: f64 = (0..ne).map(|e| mesh.area(e) * f.values[e * nt + c]).sum();
        f_mean = f_mean.max(s.abs());
    }
    if f_mean > 1e-6 {
        return Err(LabError::FluxMean(f_mean));
    }

    // Torus Poisson with the identity: ∫∇h·∇v = −∫F v.
    let identity = CoefficientField::identity(1);
    let cons = Constraints::periodic(&cc.cell.periodic_map, 1, true);
    let fact = Factorized::new(assemble_matrix(&mesh, &Stiffness::uniform(&identity, 1.0), &cons)?, solver.opts)?;
    let mut potentials = Vec::with_capacity(nt);
    for c in 0..nt {
        let mut load = vec![0.0; mesh.n_vertices()];
        for e in 0..ne {
            let share = -f.values[e * nt + c] * mesh.area(e) / 3.0;
            for &v in &mesh.elements[e] {
                load[v] += share;
            }
        }
        let z = fact.solve(&cons.reduce(&load))?;
        let mut h = FemFunction::new(mesh.clone(), 1, cons.expand(&z))?;
        h.remove_mean();
        potentials.push(h);
    }

    // Ψ_kij = ∂_k h_ij − ∂_i h_kj.
    let mut psi = P0Field::zeros(mesh.clone(), 2 * nt);
    let mut dh = vec![[0.0; 2]; nt];
    let mut g = [0.0; 2];
    let mut skew = 0.0f64;
    for e in 0..ne {
        for (c, h) in potentials.iter().enumerate() {
            h.element_gradient(e, &mut g);
            dh[c] = g;
        }
        let out = &mut psi.values[e * 2 * nt..(e + 1) * 2 * nt];
        for k in 0..2 {
            for i in 0..2 {
                for al in 0..m {
                    for j in 0..2 {
                        for beta in 0..m {
                            let ij = tensor_index(m, i, al, j, beta);
                            let kj = tensor_index(m, k, al, j, beta);
                            out[k * nt + ij] = dh[ij][k] - dh[kj][i];
                        }
                    }
                }
            }
        }
        for k in 0..2 {
            for i in 0..2 {
                for al in 0..m {
                    for j in 0..2 {
                        for beta in 0..m {
                            let a = out[k * nt + tensor_index(m, i, al, j, beta)];
                            let b = out[i * nt + tensor_index(m, k, al, j, beta)];
                            skew = skew.max((a + b).abs());
                        }
                    }
                }
            }
        }
    }

    let div_residual = weak_divergence_residual(&cc.cell.periodic_map, &f, &psi, m);

    let mut variation = 0.0;
    for j in 0..2 {
        for beta in 0..m {
            for al in 0..m {
                let mut div = vec![0.0; ne];
                for (e, d) in div.iter_mut().enumerate() {
                    for i in 0..2 {
                        potentials[tensor_index(m, i, al, j, beta)].element_gradient(e, &mut g);
                        *d += g[i];
                    }
                }
                let mean: f64 = (0..ne).map(|e| mesh.area(e) * div[e]).sum::<f64>() / mesh.total_area();
                variation += (0..ne).map(|e| mesh.area(e) * (div[e] - mean).powi(2)).sum::<f64>();
            }
        }
    }

    let report = FluxReport {
        f_l2: f.l2(&ElementFilter::All),
        psi_l2: psi.l2(&ElementFilter::All),
        div_residual,
        skew_residual: skew,
        f_mean,
        potential_div_variation: variation.sqrt(),
    };
    Ok(FluxData { tag: cc.tag, m, f, potentials, psi, report })
}

/// Largest |∫Ψ_kij ∂_k v + ∫F_ij v| / ‖v‖_{H1} over periodic hat functions v.
fn weak_divergence_residual(periodic_map: &[usize], f: &P0Field, psi: &P0Field, m: usize) -> f64 {
    let mesh = &f.mesh;
    let nt = 4 * m * m;
    let nv = mesh.n_vertices();
    let mut resid = vec![0.0; nv * nt];
    let mut norm2 = vec![0.0; nv];
    for e in 0..mesh.n_elements() {
        let (area, grads) = mesh.basis_gradients(e);
        let fe = f.element(e);
        let pe = psi.element(e);
        for (a, &v) in mesh.elements[e].iter().enumerate() {
            let master = periodic_map[v];
            norm2[master] += area / 6.0 + area * (grads[a][0].powi(2) + grads[a][1].powi(2));
            for i in 0..2 {
                for al in 0..m {
                    for j in 0..2 {
                        for beta in 0..m {
                            let c = tensor_index(m, i, al, j, beta);
                            let mut s = fe[c] / 3.0;
                            for (k, gk) in grads[a].iter().enumerate() {
                                s += pe[k * nt + c] * gk;
                            }
                            resid[master * nt + c] += area * s;
                        }
                    }
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for v in 0..nv {
        if periodic_map[v] == v {
            let n = norm2[v].sqrt();
            for c in 0..nt {
                worst = worst.max(resid[v * nt + c].abs() / n);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::InclusionShape;

    fn solver() -> CellSolver {
        CellSolver::new(CoefficientField::identity(1), InclusionShape::Square { r: 0.25 }, 16, SolverOptions::default()).unwrap()
    }

    #[test]
    fn unit_contrast_has_no_flux() {
        let s = solver();
        let cc = s.solve(1.0).unwrap();
        let fd = build_flux_with(&s, &cc, &s.homogenized(&cc)).unwrap();
        assert!(fd.report.f_l2 < 1e-12 && fd.report.psi_l2 < 1e-12);
    }

    #[test]
    fn skew_and_mean_free() {
        let s = solver();
        let cc = s.solve(10.0).unwrap();
        let fd = build_flux_with(&s, &cc, &s.homogenized(&cc)).unwrap();
        assert_eq!(fd.report.skew_residual, 0.0);
        assert!(fd.report.f_mean < 1e-9);
        for e in 0..fd.psi.mesh.n_elements() {
            assert_eq!(fd.psi_component(e, 0, 0, 0, 1, 0), 0.0);
            assert_eq!(fd.psi_component(e, 0, 1, 0, 0, 0), -fd.psi_component(e, 1, 0, 0, 0, 0));
        }
    }

    #[test]
    fn rejects_stiff_limit_and_inconsistent_tensor() {
        let s = solver();
        let inf = s.solve_infinity().unwrap();
        assert!(build_flux_with(&s, &inf, &s.homogenized(&inf)).is_err());
        let cc = s.solve(10.0).unwrap();
        let mut t = s.homogenized(&cc);
        t.entries[0] += 1e-3;
        assert!(matches!(build_flux_with(&s, &cc, &t), Err(LabError::FluxMean(_))));
    }
}
