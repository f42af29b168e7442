//! Mollification at scale ε and the boundary cutoff.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::fem::FemFunction;
use crate::geometry::{distance_to_boundary, DomainMesh, PointLocator};

/// Gauss–Legendre nodes and weights on [−1, 1] (Golub–Welsch).
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let jacobi = DMatrix::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// c with ∫ c·exp(−1/(1 − |2z|²)) dz = 1 over the disk |z| < 1/2, by
/// composite Gauss–Legendre on the radial integral.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let (x, w) = gauss_legendre(20);
        let panels = 64;
        let hw = 0.25 / panels as f64;
        let mut radial = 0.0;
        for p in 0..panels {
            let mid = (2 * p + 1) as f64 * hw;
            for (t, wt) in x.iter().zip(&w) {
                let rho = mid + hw * t;
                radial += hw * wt * rho * (-1.0 / (1.0 - 4.0 * rho * rho)).exp();
            }
        }
        1.0 / (2.0 * PI * radial)
    })
}

/// The bump ξ(z) = c·exp(−1/(1 − |2z|²)) supported in |z| < 1/2.
pub fn bump(z: [f64; 2]) -> f64 {
    let s = 4.0 * (z[0] * z[0] + z[1] * z[1]);
    if s >= 1.0 {
        0.0
    } else {
        mollifier_constant() * (-1.0 / (1.0 - s)).exp()
    }
}

/// Tensor quadrature of the bump on [−1/2, 1/2]², weights renormalized to
/// sum to one so constants are reproduced exactly.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub offsets: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Mollifier {
    pub fn new(q: usize) -> Self {
        let (x, w) = gauss_legendre(q);
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for (a, wa) in x.iter().zip(&w) {
            for (b, wb) in x.iter().zip(&w) {
                let z = [0.5 * a, 0.5 * b];
                let val = 0.25 * wa * wb * bump(z);
                if val > 0.0 {
                    offsets.push(z);
                    weights.push(val);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= total);
        Mollifier { offsets, weights }
    }

    /// Raw quadrature of ∫ξ before renormalization.
    pub fn raw_mass(q: usize) -> f64 {
        let (x, w) = gauss_legendre(q);
        let mut s = 0.0;
        for (a, wa) in x.iter().zip(&w) {
            for (b, wb) in x.iter().zip(&w) {
                s += 0.25 * wa * wb * bump([0.5 * a, 0.5 * b]);
            }
        }
        s
    }
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier::new(8)
    }
}

/// Distance ramp: 0 within 3ε of ∂Ω, 1 beyond 4ε, linear between.
pub fn cutoff(x: [f64; 2], eps: f64) -> f64 {
    ((distance_to_boundary(x) - 3.0 * eps) / eps).clamp(0.0, 1.0)
}

/// Nodal values of S_ε(η·v) (or S_ε(v) without the cutoff) for a P1 field
/// on the domain mesh, extended by zero outside Ω.
pub fn smooth_and_cut(field: &FemFunction, dm: &DomainMesh, moll: &Mollifier, apply_cutoff: bool) -> Result<FemFunction> {
    let eps = dm.epsilon;
    // Inradius of the unit square.
    if eps > 0.5 {
        return Err(LabError::invalid(format!("smoothing scale {eps} exceeds the domain inradius 1/2")));
    }
    let mesh = dm.mesh.clone();
    let m = field.m();
    let locator = PointLocator::new(&mesh);
    let mut values = vec![0.0; mesh.n_vertices() * m];
    values.par_chunks_mut(m).enumerate().for_each(|(v, out)| {
        let x = mesh.vertices[v];
        if apply_cutoff && distance_to_boundary(x) + 0.5 * eps * std::f64::consts::SQRT_2 <= 3.0 * eps {
            return;
        }
        let mut buf = vec![0.0; m];
        for (z, w) in moll.offsets.iter().zip(&moll.weights) {
            let p = [x[0] - eps * z[0], x[1] - eps * z[1]];
            if p[0] < 0.0 || p[1] < 0.0 || p[0] > 1.0 || p[1] > 1.0 {
                continue;
            }
            let eta = if apply_cutoff { cutoff(p, eps) } else { 1.0 };
            if eta == 0.0 {
                continue;
            }
            if let Some((e, lam)) = locator.locate(&mesh, p) {
                field.eval_bary(e, lam, &mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o += w * eta * b;
                }
            }
        }
    });
    FemFunction::new(mesh, m, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_perforated_mesh, DomainType, InclusionShape};

    /// E1(1), the exponential integral at 1.
    const E1_ONE: f64 = 0.219_383_934_395_520_3;

    #[test]
    fn constant_matches_closed_form() {
        let closed = 4.0 / (PI * ((-1.0f64).exp() - E1_ONE));
        assert!((mollifier_constant() - closed).abs() < 1e-10 * closed, "{} vs {closed}", mollifier_constant());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m8: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(8)).sum();
        assert!((m8 - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn raw_quadrature_is_close_to_unit_mass() {
        assert!((Mollifier::raw_mass(16) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constants_survive_smoothing() {
        let dm = build_perforated_mesh(InclusionShape::Square { r: 0.25 }, 0.125, 0.1, 4, DomainType::TypeII).unwrap();
        let one = FemFunction::from_fn(dm.mesh.clone(), 1, |_, out| out[0] = 2.5).unwrap();
        let s = smooth_and_cut(&one, &dm, &Mollifier::default(), false).unwrap();
        for (v, p) in dm.mesh.vertices.iter().enumerate() {
            if distance_to_boundary(*p) >= 0.5 * 0.125 * std::f64::consts::SQRT_2 {
                assert!((s.value(v, 0) - 2.5).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cutoff_support() {
        let eps = 0.05;
        for k in 0..=100 {
            let x = [k as f64 / 100.0, 0.5];
            let d = distance_to_boundary(x);
            let eta = cutoff(x, eps);
            if d <= 3.0 * eps {
                assert_eq!(eta, 0.0);
            }
            if d >= 4.0 * eps + 1e-12 {
                assert_eq!(eta, 1.0);
            }
            assert!((0.0..=1.0).contains(&eta));
        }
    }

    #[test]
    fn rejects_coarse_scale() {
        let dm = build_perforated_mesh(InclusionShape::Square { r: 0.25 }, 2.0, 0.1, 4, DomainType::TypeII).unwrap();
        let one = FemFunction::from_fn(dm.mesh.clone(), 1, |_, out| out[0] = 1.0).unwrap();
        assert!(smooth_and_cut(&one, &dm, &Mollifier::default(), true).is_err());
    }
}
