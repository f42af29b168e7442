use rayon::prelude::*;
use serde::Serialize;

use super::problem::{aux_inverse, solve_heterogeneous, solve_homogenized, ProblemSpec};
use super::smoothing::{smooth_and_cut, Mollifier};
use crate::cell::{CellCorrectors, CellSolver, HomogenizedTensor};
use crate::error::{LabError, Result};
use crate::fem::{quad_points, tensor_index, ElementFilter, FemFunction, PeriodicSampler, SolverOptions, QUAD_BARY};
use crate::flux::{build_flux_with, FluxData};
use crate::geometry::{distance_to_boundary, DomainMesh, InclusionShape, Region};

/// Cell-level ingredients at one contrast.
pub struct CellData {
    pub correctors: CellCorrectors,
    pub tensor: HomogenizedTensor,
    pub flux: FluxData,
}

impl CellData {
    pub fn compute(coef: &crate::fem::CoefficientField, shape: InclusionShape, n: usize, delta: f64, opts: SolverOptions) -> Result<Self> {
        let solver = CellSolver::new(coef.clone(), shape, n, opts)?;
        let correctors = solver.solve(delta)?;
        let tensor = solver.homogenized(&correctors);
        let flux = build_flux_with(&solver, &correctors, &tensor)?;
        Ok(CellData { correctors, tensor, flux })
    }
}

#[derive(Clone, Debug)]
pub struct DiscrepancyOptions {
    pub solver: SolverOptions,
    /// Gauss–Legendre points per axis in the mollifier stencil.
    pub mollifier_points: usize,
    /// When set, rerun at half the refinement and fail if the corrected
    /// error moves by more than this fraction.
    pub resolution_limit: Option<f64>,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        DiscrepancyOptions { solver: SolverOptions::default(), mollifier_points: 8, resolution_limit: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyReport {
    pub eps: f64,
    pub delta: f64,
    pub m_ref: usize,
    pub modify_f: bool,
    /// ‖u − û − εχ(x/ε)S_ε(η∇û) − aux‖_{H1}.
    pub h1_error: f64,
    /// ‖u − û‖_{H1}.
    pub uncorrected_error: f64,
    /// h1_error restricted to elements at distance ≥ 5ε from ∂Ω, clear of
    /// the cutoff layer and the smoothing stencil.
    pub interior_error: f64,
    pub corrector_norm: f64,
    pub p_l2: f64,
    pub q_l2: f64,
    pub r_l2: f64,
    /// ‖δ⁻¹ v‖_{H1} of the inclusion-only auxiliary solve (0 when dropped).
    pub aux_norm: f64,
    pub energy: f64,
    /// max over elements of |∇u|.
    pub grad_sup: f64,
    /// |e(m_ref) − e(m_ref/2)| / e(m_ref), when checked.
    pub resolution_ratio: Option<f64>,
}

impl DiscrepancyReport {
    /// ‖P‖ + ‖Q‖ + ε‖R‖.
    pub fn pqr(&self) -> f64 {
        self.p_l2 + self.q_l2 + self.eps * self.r_l2
    }
}

/// Samples every corrector of a family at x/ε for all domain vertices.
fn sample_correctors(cc: &CellCorrectors, dm: &DomainMesh) -> Result<Vec<FemFunction>> {
    let sampler = PeriodicSampler::new(cc.cell.mesh.clone());
    let eps = dm.epsilon;
    let m = cc.m();
    let nv = dm.mesh.n_vertices();
    let located: Vec<(usize, [f64; 3])> = dm
        .mesh
        .vertices
        .par_iter()
        .map(|x| sampler.locate([x[0] / eps, x[1] / eps]))
        .collect::<Result<_>>()?;
    cc.chi
        .iter()
        .map(|chi| {
            let mut values = vec![0.0; nv * m];
            for (v, &(e, lam)) in located.iter().enumerate() {
                chi.eval_bary(e, lam, &mut values[v * m..(v + 1) * m]);
            }
            FemFunction::new(dm.mesh.clone(), m, values)
        })
        .collect()
}

pub fn discrepancy(spec: &ProblemSpec, cell: &CellData, opts: &DiscrepancyOptions) -> Result<DiscrepancyReport> {
    let dm = spec.mesh()?;
    let mut report = discrepancy_on(spec, &dm, cell, opts)?;
    if let Some(limit) = opts.resolution_limit {
        let coarse_ref = spec.m_ref / 2;
        if coarse_ref < 4 {
            return Err(LabError::invalid(format!(
                "resolution check needs m_ref >= 8 (coarse run at m_ref/2 >= 4), got {}",
                spec.m_ref
            )));
        }
        let mut coarse = spec.clone();
        coarse.m_ref = coarse_ref;
        let cdm = coarse.mesh()?;
        let e2 = discrepancy_on(&coarse, &cdm, cell, opts)?.h1_error;
        let ratio = (report.h1_error - e2).abs() / report.h1_error.max(f64::MIN_POSITIVE);
        report.resolution_ratio = Some(ratio);
        if ratio > limit {
            return Err(LabError::Resolution { ratio, limit });
        }
    }
    Ok(report)
}

/// All report quantities on a given mesh (no resolution check).
pub fn discrepancy_on(spec: &ProblemSpec, dm: &DomainMesh, cell: &CellData, opts: &DiscrepancyOptions) -> Result<DiscrepancyReport> {
    let cc = &cell.correctors;
    let m = spec.coef.m();
    if cc.m() != m {
        return Err(LabError::invalid("correctors and problem disagree on m"));
    }
    if let crate::cell::DeltaTag::Finite(d) = cc.tag {
        if (d - spec.delta).abs() > 1e-12 * d.max(1.0) {
            return Err(LabError::invalid(format!("correctors at δ = {d}, problem at δ = {}", spec.delta)));
        }
    } else {
        return Err(LabError::invalid("discrepancy needs finite-contrast correctors"));
    }
    let mesh = dm.mesh.clone();
    let eps = dm.epsilon;
    let filter = match dm.report_mask() {
        Some(mask) => ElementFilter::Mask(std::sync::Arc::new(mask)),
        None => ElementFilter::All,
    };

    let u = solve_heterogeneous(spec, dm, opts.solver)?;
    let uh = solve_homogenized(&cell.tensor, spec, dm, opts.solver)?;
    let aux = if spec.source_is_modified() {
        None
    } else {
        Some(aux_inverse(spec, dm, opts.solver)?.scaled(1.0 / spec.delta))
    };

    // S_ε(η∇û), components β*2 + j.
    let grad_lift = uh.gradient_p0().nodal_average();
    let moll = Mollifier::new(opts.mollifier_points);
    let smooth = smooth_and_cut(&grad_lift, dm, &moll, true)?;
    let chi = sample_correctors(cc, dm)?;

    let nv = mesh.n_vertices();
    let mut corr = vec![0.0; nv * m];
    for v in 0..nv {
        for j in 0..2 {
            for beta in 0..m {
                let s = smooth.value(v, beta * 2 + j);
                if s == 0.0 {
                    continue;
                }
                for al in 0..m {
                    corr[v * m + al] += eps * chi[j * m + beta].value(v, al) * s;
                }
            }
        }
    }
    let corrector = FemFunction::new(mesh.clone(), m, corr)?;

    let mut w = u.difference(&uh)?;
    let uncorrected = w.norms(&filter).h1();
    w.axpy(-1.0, &corrector)?;
    let aux_norm = match &aux {
        Some(a) => {
            w.axpy(-1.0, a)?;
            a.norms(&filter).h1()
        }
        None => 0.0,
    };
    let h1_error = w.norms(&filter).h1();
    let interior = ElementFilter::Mask(std::sync::Arc::new(
        (0..mesh.n_elements()).map(|e| distance_to_boundary(mesh.centroid(e)) >= 5.0 * eps).collect(),
    ));
    let interior_error = w.norms(&interior).h1();

    let (p2, q2, r2) = pqr_squares(spec, dm, cell, &u, &uh, &smooth, &chi, &filter)?;

    let mut grad_sup = 0.0f64;
    let mut g = vec![0.0; 2 * m];
    for e in 0..mesh.n_elements() {
        u.element_gradient(e, &mut g);
        grad_sup = grad_sup.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
    }

    Ok(DiscrepancyReport {
        eps,
        delta: spec.delta,
        m_ref: dm.m_ref,
        modify_f: spec.modify_f,
        h1_error,
        uncorrected_error: uncorrected,
        interior_error,
        corrector_norm: corrector.norms(&filter).h1(),
        p_l2: p2.sqrt(),
        q_l2: q2.sqrt(),
        r_l2: r2.sqrt(),
        aux_norm,
        energy: u.norms(&ElementFilter::All).h1(),
        grad_sup,
        resolution_ratio: None,
    })
}

/// Squared L2 norms of P, Q and R by 3-point quadrature.
#[allow(clippy::too_many_arguments)]
fn pqr_squares(
    spec: &ProblemSpec,
    dm: &DomainMesh,
    cell: &CellData,
    u: &FemFunction,
    uh: &FemFunction,
    smooth: &FemFunction,
    chi: &[FemFunction],
    filter: &ElementFilter,
) -> Result<(f64, f64, f64)> {
    let _ = u;
    let mesh = &dm.mesh;
    let eps = dm.epsilon;
    let m = spec.coef.m();
    let nt = 4 * m * m;
    let sampler = PeriodicSampler::new(cell.correctors.cell.mesh.clone());
    let psi = &cell.flux.psi;
    let ahat = &cell.tensor.entries;

    let partial = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| -> Result<[f64; 3]> {
            if !filter.keeps(mesh, e) {
                return Ok([0.0; 3]);
            }
            let area = mesh.area(e);
            let c = mesh.centroid(e);
            let (ce, _) = sampler.locate([c[0] / eps, c[1] / eps])?;
            let psi_e = psi.element(ce);

            let mut grad_uh = vec![0.0; 2 * m];
            uh.element_gradient(e, &mut grad_uh);
            // ∂_k S_j^β at component (β*2 + j)*2 + k.
            let mut grad_s = vec![0.0; 4 * m];
            smooth.element_gradient(e, &mut grad_s);
            // ∇_y (χ_j^β)^γ = ε ∇_x, at [j*m+β][γ*2+k].
            let mut grad_chi = vec![vec![0.0; 2 * m]; 2 * m];
            for (c, g) in chi.iter().zip(grad_chi.iter_mut()) {
                c.element_gradient(e, g);
                g.iter_mut().for_each(|x| *x *= eps);
            }

            let mut a = vec![0.0; nt];
            let mut s_val = vec![0.0; 2 * m];
            let mut chi_val = vec![vec![0.0; m]; 2 * m];
            let mut acc = [0.0; 3];
            for (q, x) in quad_points(mesh, e).iter().enumerate() {
                spec.coef.evaluate_into([x[0] / eps, x[1] / eps], &mut a);
                smooth.eval_bary(e, QUAD_BARY[q], &mut s_val);
                for (c, val) in chi.iter().zip(chi_val.iter_mut()) {
                    c.eval_bary(e, QUAD_BARY[q], val);
                }
                // D_j^β = S_j^β − ∂_j û^β.
                let d = |j: usize, beta: usize| s_val[beta * 2 + j] - grad_uh[beta * 2 + j];
                let ds = |k: usize, j: usize, beta: usize| grad_s[(beta * 2 + j) * 2 + k];
                let w = area / 3.0;
                for i in 0..2 {
                    for al in 0..m {
                        let mut p = 0.0;
                        let mut qv = 0.0;
                        for j in 0..2 {
                            for beta in 0..m {
                                let mut inner = d(j, beta);
                                for k in 0..2 {
                                    for g in 0..m {
                                        inner -= eps * chi_val[k * m + g][beta] * ds(j, k, g);
                                    }
                                }
                                p += a[tensor_index(m, i, al, j, beta)] * inner;
                                let idx = tensor_index(m, i, al, j, beta);
                                for k in 0..2 {
                                    qv += eps * psi_e[k * nt + idx] * ds(k, j, beta);
                                }
                                qv -= ahat[idx] * d(j, beta);
                            }
                        }
                        acc[0] += w * p * p;
                        acc[1] += w * qv * qv;
                    }
                }
                for al in 0..m {
                    let mut r = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            for beta in 0..m {
                                let mut coef = a[tensor_index(m, i, al, j, beta)];
                                for k in 0..2 {
                                    for g in 0..m {
                                        coef += a[tensor_index(m, i, al, k, g)] * grad_chi[j * m + beta][g * 2 + k];
                                    }
                                }
                                r += coef * ds(i, j, beta);
                            }
                        }
                    }
                    acc[2] += w * r * r;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // Summed in element order so reruns are bit-identical whatever the thread count.
    let mut total = [0.0; 3];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok((total[0], total[1], total[2]))
}

/// Largest elementwise |∇u| over Ω, the inclusions, and the matrix.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradientSup {
    pub delta: f64,
    pub all: f64,
    pub inclusions: f64,
    pub matrix: f64,
}

pub fn gradient_sup(u: &FemFunction, delta: f64) -> GradientSup {
    let mesh = u.mesh();
    let m = u.m();
    let mut g = vec![0.0; 2 * m];
    let mut out = GradientSup { delta, all: 0.0, inclusions: 0.0, matrix: 0.0 };
    for e in 0..mesh.n_elements() {
        u.element_gradient(e, &mut g);
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.all = out.all.max(n);
        match mesh.region[e] {
            Region::Inclusion => out.inclusions = out.inclusions.max(n),
            Region::Matrix => out.matrix = out.matrix.max(n),
        }
    }
    out
}

/// Solves the heterogeneous problem for each δ (same mesh) and records the
/// gradient maxima. `base.delta` is ignored.
pub fn gradient_sup_probe(base: &ProblemSpec, deltas: &[f64], opts: SolverOptions) -> Result<Vec<GradientSup>> {
    let dm = base.mesh()?;
    deltas
        .iter()
        .map(|&d| {
            let mut spec = base.clone();
            spec.delta = d;
            Ok(gradient_sup(&solve_heterogeneous(&spec, &dm, opts)?, d))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::CoefficientField;

    #[test]
    fn unit_contrast_identity_collapses() {
        let shape = InclusionShape::Square { r: 0.25 };
        let coef = CoefficientField::identity(1);
        let cell = CellData::compute(&coef, shape, 16, 1.0, SolverOptions::default()).unwrap();
        let mut spec = ProblemSpec::reference(coef, shape, 0.125, 1.0, 4);
        spec.modify_f = false;
        let dm = spec.mesh().unwrap();
        let r = discrepancy_on(&spec, &dm, &cell, &DiscrepancyOptions::default()).unwrap();
        // u = û exactly; what remains is the inclusion-only auxiliary term.
        assert!(r.uncorrected_error < 1e-10, "{r:?}");
        assert!((r.h1_error - r.aux_norm).abs() < 1e-10, "{r:?}");
        assert!(r.corrector_norm < 1e-12 && r.p_l2 >= 0.0);
    }

    #[test]
    fn rejects_mismatched_contrast() {
        let shape = InclusionShape::Square { r: 0.25 };
        let coef = CoefficientField::identity(1);
        let cell = CellData::compute(&coef, shape, 16, 2.0, SolverOptions::default()).unwrap();
        let spec = ProblemSpec::reference(coef, shape, 0.125, 1.0, 4);
        assert!(discrepancy(&spec, &cell, &DiscrepancyOptions::default()).is_err());
    }
}
