use homog_core::cell::{homogenized_tensor, log_grid, CellSolver, DeltaTag};
use homog_core::fem::{CoefficientField, SolverOptions};
use homog_core::geometry::{InclusionShape, Region};
use proptest::prelude::*;

const SQUARE: InclusionShape = InclusionShape::Square { r: 0.25 };

fn solver(coef: CoefficientField, shape: InclusionShape, n: usize) -> CellSolver {
    CellSolver::new(coef, shape, n, SolverOptions::default()).unwrap()
}

#[test]
fn symmetric_geometry_gives_scalar_tensor() {
    let s = solver(CoefficientField::identity(1), SQUARE, 32);
    let t = s.homogenized(&s.solve(10.0).unwrap());
    assert!(t.get(0, 0, 1, 0).abs() <= 1e-8 && t.get(1, 0, 0, 0).abs() <= 1e-8);
    assert!((t.get(0, 0, 0, 0) - t.get(1, 0, 1, 0)).abs() <= 1e-8);
    assert!(t.get(0, 0, 0, 0) > 1.0);
}

#[test]
fn disk_tensors_respect_two_phase_bounds() {
    let r = 0.3;
    let phi = std::f64::consts::PI * r * r;
    let s = solver(CoefficientField::identity(1), InclusionShape::Disk { r }, 64);
    let stiff = s.homogenized(&s.solve_infinity().unwrap());
    let soft = s.homogenized(&s.solve_zero().unwrap());
    // The polygon is inscribed, so its area only sharpens both comparisons.
    assert!(s.cell.mesh.region_area(Region::Inclusion) < phi);
    assert!(stiff.mu1 >= (1.0 + phi) / (1.0 - phi), "{}", stiff.mu1);
    assert!(soft.eigenvalues()[1] <= (1.0 - phi) / (1.0 + phi), "{:?}", soft.eigenvalues());
}

fn sample_coefs() -> [CoefficientField; 2] {
    [CoefficientField::identity(1), CoefficientField::oscillating()]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tensor_grows_with_contrast(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        t0 in -0.99f64..1.0,
        t1 in -0.99f64..1.0,
    ) {
        prop_assume!((a - b).abs() > 1e-3);
        let (lo, hi) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let s = solver(CoefficientField::oscillating(), SQUARE, 16);
        let (tl, th) = (s.homogenized(&s.solve(lo).unwrap()), s.homogenized(&s.solve(hi).unwrap()));
        let xi = [t0, t1];
        prop_assert!(th.quadratic_form(&xi) >= tl.quadratic_form(&xi) - 1e-10);
        prop_assert!(tl.symmetry_defect() <= 1e-10 && th.symmetry_defect() <= 1e-10);
    }
}

#[test]
fn equations_hold_to_solver_tolerance() {
    for coef in sample_coefs() {
        let s = solver(coef, SQUARE, 32);
        let opts = SolverOptions::default();
        for d in [1e-3, 1.0, 1e3] {
            let r = s.weak_residual(&s.solve(d).unwrap()).unwrap();
            assert!(r <= 10.0 * opts.tol, "δ = {d}: {r}");
        }
        let inf = s.solve_infinity().unwrap();
        assert!(s.compatibility_residual(&inf).unwrap() <= 1e-8);
        assert!(s.weak_residual(&inf).is_err());
    }
}

#[test]
fn unit_contrast_sweep_matches_direct_solve() {
    let s = solver(CoefficientField::oscillating(), SQUARE, 16);
    let sweep = s.sweep(&[1.0]).unwrap();
    let direct = homogenized_tensor(&s.solve(1.0).unwrap());
    assert_eq!(direct.tag, DeltaTag::Finite(1.0));
    assert!(sweep.tensors[0].distance(&direct) < 1e-14);
    assert!(sweep.soft_rate.is_none() && sweep.stiff_rate.is_none());
    // Sandwiched between the two limits.
    assert!(sweep.zero.mu1 <= direct.mu1 && direct.mu1 <= sweep.infinity.mu1);
}

#[test]
fn contrast_grid_is_logarithmic() {
    let g = log_grid(-2.0, 2.0, 5);
    assert_eq!(g.len(), 5);
    assert!((g[2] - 1.0).abs() < 1e-15);
    assert!(g.windows(2).all(|w| (w[1] / w[0] - 10.0).abs() < 1e-12));
}
