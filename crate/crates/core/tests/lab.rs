use homog_core::cell::{DeltaTag, HomogenizedTensor};
use homog_core::experiments::fit_rate;
use homog_core::fem::{CoefficientField, ElementFilter, FemFunction, SolverOptions};
use homog_core::geometry::{InclusionShape, Region};
use homog_core::lab::{
    aux_inverse, discrepancy_on, smooth_and_cut, solve_heterogeneous, solve_homogenized, CellData, DataField,
    DiscrepancyOptions, Mollifier, ProblemSpec,
};

const SQUARE: InclusionShape = InclusionShape::Square { r: 0.25 };

fn spec(eps: f64, delta: f64) -> ProblemSpec {
    ProblemSpec::reference(CoefficientField::oscillating(), SQUARE, eps, delta, 4)
}

#[test]
fn discrepancy_is_linear_in_the_data() {
    let opts = DiscrepancyOptions::default();
    for delta in [0.1, 10.0] {
        let cell = CellData::compute(&CoefficientField::oscillating(), SQUARE, 16, delta, opts.solver).unwrap();
        let base = spec(0.25, delta);
        let dm = base.mesh().unwrap();
        let mut twice = base.clone();
        twice.f = base.f.scaled(2.0);
        twice.g = base.g.scaled(2.0);
        let (a, b) = (discrepancy_on(&base, &dm, &cell, &opts).unwrap(), discrepancy_on(&twice, &dm, &cell, &opts).unwrap());
        for (x, y) in [
            (a.h1_error, b.h1_error),
            (a.uncorrected_error, b.uncorrected_error),
            (a.corrector_norm, b.corrector_norm),
            (a.aux_norm, b.aux_norm),
        ] {
            assert!((2.0 * x - y).abs() <= 1e-10 * y.max(1.0), "δ = {delta}: {x} {y}");
        }
        assert!(a.h1_error <= a.uncorrected_error + a.corrector_norm + a.aux_norm + 1e-12);
    }
}

#[test]
fn gradient_energy_splits_by_region() {
    let s = spec(0.25, 5.0);
    let dm = s.mesh().unwrap();
    let u = solve_heterogeneous(&s, &dm, SolverOptions::default()).unwrap();
    let whole = u.norms(&ElementFilter::All).h1_semi;
    let parts: f64 = [Region::Matrix, Region::Inclusion].iter().map(|&r| u.norms(&ElementFilter::Region(r)).h1_semi.powi(2)).sum();
    assert!((whole * whole - parts).abs() <= 1e-12 * whole * whole);
}

#[test]
fn inclusion_solve_scales_with_period() {
    let series: Vec<(f64, f64, f64)> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&eps| {
            let s = spec(eps, 1.0);
            let dm = s.mesh().unwrap();
            let v = aux_inverse(&s, &dm, SolverOptions::default()).unwrap();
            assert!(v.norms(&ElementFilter::Region(Region::Matrix)).h1() == 0.0);
            let n = v.norms(&ElementFilter::All);
            (eps, n.l2, n.h1_semi)
        })
        .collect();
    let l2 = fit_rate(&series.iter().map(|s| (s.0, s.1)).collect::<Vec<_>>()).unwrap();
    let grad = fit_rate(&series.iter().map(|s| (s.0, s.2)).collect::<Vec<_>>()).unwrap();
    assert!((l2.slope - 2.0).abs() <= 0.2, "{l2:?}");
    assert!((grad.slope - 1.0).abs() <= 0.1, "{grad:?}");
}

#[test]
fn identity_tensor_reproduces_affine_data() {
    let mut s = spec(0.25, 1.0);
    s.f = DataField::zero(1);
    s.g = DataField::affine(1, [0.5, -1.0, 2.0]);
    let dm = s.mesh().unwrap();
    let id = HomogenizedTensor::new(DeltaTag::Finite(1.0), 1, vec![1.0, 0.0, 0.0, 1.0]);
    let u = solve_homogenized(&id, &s, &dm, SolverOptions::default()).unwrap();
    for (v, x) in dm.mesh.vertices.iter().enumerate() {
        assert!((u.value(v, 0) - (0.5 - x[0] + 2.0 * x[1])).abs() < 1e-10);
    }
}

#[test]
fn energy_is_uniform_in_contrast_with_scaled_source() {
    let opts = SolverOptions::default();
    let energies: Vec<f64> = [1e-3, 1e-1, 1.0, 1e1, 1e3]
        .iter()
        .map(|&delta| {
            let mut s = spec(0.125, delta);
            s.modify_f = true;
            let dm = s.mesh().unwrap();
            let u = solve_heterogeneous(&s, &dm, opts).unwrap();
            u.norms(&ElementFilter::Region(Region::Matrix)).h1_semi.powi(2)
                + delta * u.norms(&ElementFilter::Region(Region::Inclusion)).h1_semi.powi(2)
        })
        .collect();
    let hi = energies.iter().cloned().fold(0.0, f64::max);
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 10.0, "{energies:?}");
}

#[test]
fn smoothing_never_amplifies() {
    let s = spec(0.125, 1.0);
    let dm = s.mesh().unwrap();
    let moll = Mollifier::new(8);
    let field = FemFunction::from_fn(dm.mesh.clone(), 1, |x, out| {
        out[0] = (9.0 * x[0]).sin() * (5.0 * x[1]).cos() + x[0] * x[0]
    })
    .unwrap();
    let smooth = smooth_and_cut(&field, &dm, &moll, false).unwrap();
    let cut = smooth_and_cut(&field, &dm, &moll, true).unwrap();
    let (a, b, c) = (
        field.norms(&ElementFilter::All).l2,
        smooth.norms(&ElementFilter::All).l2,
        cut.norms(&ElementFilter::All).l2,
    );
    // Positive weights of unit mass, so Young's inequality caps the gain at one.
    assert!(b <= a * (1.0 + 1e-3), "{a} {b}");
    assert!(c <= b && c > 0.0, "{b} {c}");
}
