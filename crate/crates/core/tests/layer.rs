use std::sync::Arc;

use homog_core::cell::CellSolver;
use homog_core::experiments::fit_rate;
use homog_core::fem::{CoefficientField, SolverOptions};
use homog_core::geometry::{build_cell_mesh, InclusionShape};
use homog_core::layer::{lambda_of_delta, np_operator, InterfaceDensity, WeakLayerOperator};
use rand::{Rng, SeedableRng};

const SQUARE: InclusionShape = InclusionShape::Square { r: 0.25 };

fn operator(coef: CoefficientField, n: usize) -> WeakLayerOperator {
    np_operator(Arc::new(build_cell_mesh(SQUARE, n).unwrap()), coef, SolverOptions::default()).unwrap()
}

#[test]
fn contrast_to_spectral_parameter() {
    assert!((lambda_of_delta(3.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((lambda_of_delta(2.0).unwrap() - 1.5).abs() < 1e-15);
    assert!((lambda_of_delta(1e-12).unwrap() + 0.5).abs() < 1e-10);
    assert!((lambda_of_delta(1e12).unwrap() - 0.5).abs() < 1e-10);
    assert!(lambda_of_delta(1.0).is_err());
    assert!(lambda_of_delta(0.0).is_err() && lambda_of_delta(f64::INFINITY).is_err());
}

#[test]
fn operator_structure() {
    let op = operator(CoefficientField::oscillating(), 16);
    let c = op.checks();
    assert!(c.self_adjoint <= 1e-9 && c.jump <= 1e-8 && c.off_interface <= 1e-10, "{c:?}");
    assert!(c.min_gram_eig > 0.0);
    assert!(op.eigenvalues().iter().all(|k| k.abs() < 0.5));

    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let ones = InterfaceDensity { values: vec![1.0; op.n_density()] };
    let unit_mass = op.density_means(&ones)[0];
    let mut values: Vec<f64> = (0..op.n_density()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = op.density_means(&InterfaceDensity { values: values.clone() })[0] / unit_mass;
    values.iter_mut().for_each(|v| *v -= mean);
    let psi = InterfaceDensity { values };
    let k = op.apply_np(&psi).unwrap();
    assert!(op.density_means(&k)[0].abs() <= 1e-10);
    assert!(op.apply_np(&ones).is_err());
}

#[test]
fn resolvent_gap_decays_like_inverse_contrast() {
    let op = operator(CoefficientField::identity(1), 16);
    let series: Vec<(f64, f64)> = [1e1, 1e2, 1e3].iter().map(|&d| (1.0 / d, op.resolvent_gap(d).unwrap())).collect();
    let rate = fit_rate(&series).unwrap();
    assert!((rate.slope - 1.0).abs() < 0.1, "{rate:?}");
    let soft: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&d| (d, op.resolvent_gap(d).unwrap())).collect();
    assert!((fit_rate(&soft).unwrap().slope - 1.0).abs() < 0.1);
}

#[test]
fn huge_contrast_approaches_stiff_limit() {
    let coef = CoefficientField::identity(1);
    let op = operator(coef.clone(), 16);
    let s = CellSolver::new(coef, SQUARE, 16, SolverOptions::default()).unwrap();
    let proxy = op.correctors(1e6).unwrap();
    let stiff = s.solve_infinity().unwrap();
    let gap = proxy.h1_distance(&stiff).unwrap();
    let size = stiff.chi_norms().iter().cloned().fold(0.0, f64::max);
    assert!(gap <= 1e-2 * size, "{gap} vs {size}");
}
