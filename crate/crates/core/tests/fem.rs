use std::f64::consts::PI;
use std::sync::Arc;

use homog_core::fem::{
    apply_stiffness, assemble, periodic_interpolate, solve, CoefficientField, Constraints, ContrastWeight,
    ElementFilter, FemFunction, SolverOptions, Stiffness,
};
use homog_core::geometry::{build_cell_mesh, build_perforated_mesh, DomainMesh, DomainType, InclusionShape, Mesh, Region};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

const SQUARE: InclusionShape = InclusionShape::Square { r: 0.25 };

/// Unit square with 4·m_ref squares per side and no inclusions.
fn plain(m_ref: usize) -> DomainMesh {
    let dm = build_perforated_mesh(SQUARE, 1.0, 0.1, m_ref, DomainType::TypeII).unwrap();
    assert!(dm.index_set.is_empty());
    dm
}

/// L2 and gradient norms straight from vertex values.
fn brute_norms(mesh: &Mesh, u: &[f64]) -> (f64, f64) {
    let (mut l2, mut semi) = (0.0, 0.0);
    for (e, tri) in mesh.elements.iter().enumerate() {
        let (area, g) = mesh.basis_gradients(e);
        let v = tri.map(|i| u[i]);
        let s: f64 = v.iter().sum();
        l2 += area / 12.0 * (v.iter().map(|x| x * x).sum::<f64>() + s * s);
        let gx: f64 = (0..3).map(|k| v[k] * g[k][0]).sum();
        let gy: f64 = (0..3).map(|k| v[k] * g[k][1]).sum();
        semi += area * (gx * gx + gy * gy);
    }
    (l2.sqrt(), semi.sqrt())
}

#[test]
fn norms_match_vertex_oracle() {
    let dm = plain(4);
    let mesh = dm.mesh.clone();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..5 {
        let vals: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l2, semi) = brute_norms(&mesh, &vals);
        let n = FemFunction::new(mesh.clone(), 1, vals).unwrap().norms(&ElementFilter::All);
        assert!((n.l2 - l2).abs() <= 1e-13 * l2.max(1.0));
        assert!((n.h1_semi - semi).abs() <= 1e-13 * semi.max(1.0));
    }
    let x = FemFunction::from_fn(mesh.clone(), 1, |p, out| out[0] = p[0]).unwrap().norms(&ElementFilter::All);
    assert!((x.h1_semi - 1.0).abs() < 1e-13);
    assert!((x.l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    let c = FemFunction::from_fn(mesh, 1, |_, out| out[0] = 2.0).unwrap().norms(&ElementFilter::All);
    assert!((c.l2 - 2.0).abs() < 1e-13 && c.h1_semi < 1e-13);
}

#[test]
fn contrast_scales_inclusion_elements_only() {
    let dm = build_perforated_mesh(SQUARE, 0.25, 0.1, 4, DomainType::TypeII).unwrap();
    let mesh = &dm.mesh;
    let a = CoefficientField::oscillating();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let x: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let unit = apply_stiffness(mesh, &Stiffness::contrast(&a, 0.25, &ContrastWeight::new(1.0).unwrap()), &x);
    let plain = apply_stiffness(mesh, &Stiffness::uniform(&a, 0.25), &x);
    assert_eq!(unit, plain);

    let ten = apply_stiffness(mesh, &Stiffness::contrast(&a, 0.25, &ContrastWeight::new(10.0).unwrap()), &x);
    let outer = apply_stiffness(mesh, &Stiffness::only(&a, 0.25, Region::Matrix), &x);
    let inner = apply_stiffness(mesh, &Stiffness::only(&a, 0.25, Region::Inclusion), &x);
    for k in 0..x.len() {
        assert!((ten[k] - outer[k] - 10.0 * inner[k]).abs() < 1e-11, "{k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stiffness_is_nonnegative(seed in any::<u64>(), delta in 1e-4f64..1e4) {
        let cm = build_cell_mesh(SQUARE, 8).unwrap();
        let a = CoefficientField::oscillating();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let x: Vec<f64> = (0..cm.mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kx = apply_stiffness(&cm.mesh, &Stiffness::contrast(&a, 1.0, &ContrastWeight::new(delta).unwrap()), &x);
        let q: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        prop_assert!(q >= -1e-10 * x.iter().map(|v| v * v).sum::<f64>());
        let ones = apply_stiffness(&cm.mesh, &Stiffness::contrast(&a, 1.0, &ContrastWeight::new(delta).unwrap()), &vec![1.0; x.len()]);
        prop_assert!(ones.iter().all(|v| v.abs() < 1e-9 * delta.max(1.0)));
    }
}

fn poisson_error(m_ref: usize) -> f64 {
    let dm = plain(m_ref);
    let mesh = &dm.mesh;
    let id = CoefficientField::identity(1);
    let cons = Constraints::dirichlet(mesh.n_vertices(), 1, &dm.boundary_vertices(), |_, out| out[0] = 0.0);
    let f = |x: [f64; 2], _: Region, out: &mut [f64]| out[0] = 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
    let sys = assemble(mesh, &id, 1.0, &ContrastWeight::new(1.0).unwrap(), Some(&f), cons).unwrap();
    let u = solve(sys, SolverOptions::default()).unwrap();
    // Edge-midpoint rule, exact for quadratics.
    let mut err = 0.0;
    let mut g = [0.0; 2];
    for e in 0..mesh.n_elements() {
        u.element_gradient(e, &mut g);
        let c = mesh.corners(e);
        for (p, q) in [(0, 1), (1, 2), (2, 0)] {
            let x = [(c[p][0] + c[q][0]) / 2.0, (c[p][1] + c[q][1]) / 2.0];
            let ex = [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()];
            err += mesh.area(e) / 3.0 * ((g[0] - ex[0]).powi(2) + (g[1] - ex[1]).powi(2));
        }
    }
    err.sqrt()
}

#[test]
fn poisson_gradient_converges_at_first_order() {
    let e: Vec<f64> = [4, 8, 16].iter().map(|&m| poisson_error(m)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((0.9..=1.1).contains(&order), "{e:?}");
    }
}

#[test]
fn stiff_cell_solve_meets_tolerance() {
    let cm = build_cell_mesh(SQUARE, 16).unwrap();
    let a = CoefficientField::oscillating();
    let cons = Constraints::periodic(&cm.periodic_map, 1, true);
    let f = |x: [f64; 2], _: Region, out: &mut [f64]| out[0] = (2.0 * PI * x[0]).cos();
    let w = ContrastWeight::new(1e4).unwrap();
    let opts = SolverOptions::default();
    let sys = assemble(&cm.mesh, &a, 1.0, &w, Some(&f), cons).unwrap();
    let (matrix, rhs) = (sys.matrix.clone(), sys.rhs.clone());
    let fact = homog_core::fem::Factorized::new(matrix, opts).unwrap();
    let (_, stats) = fact.solve_with_stats(&rhs).unwrap();
    assert!(stats.residual <= opts.tol, "{}", stats.residual);
}

#[test]
fn periodic_interpolation() {
    let cm = build_cell_mesh(SQUARE, 16).unwrap();
    let dm = build_perforated_mesh(SQUARE, 0.25, 0.1, 8, DomainType::TypeII).unwrap();
    let one = FemFunction::from_fn(cm.mesh.clone(), 1, |_, out| out[0] = 1.0).unwrap();
    let lifted = periodic_interpolate(&one, 0.25, &dm).unwrap();
    assert!(lifted.values().iter().all(|v| (v - 1.0).abs() < 1e-14));

    let err = |n: usize| {
        let cm = build_cell_mesh(SQUARE, n).unwrap();
        let f = FemFunction::from_fn(cm.mesh.clone(), 1, |y, out| out[0] = (2.0 * PI * y[0]).cos()).unwrap();
        let g = periodic_interpolate(&f, 0.25, &dm).unwrap();
        dm.mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(v, x)| (g.value(v, 0) - (2.0 * PI * x[0] / 0.25).cos()).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(8), err(16));
    assert!(coarse < 0.1 && fine < 0.03, "{coarse} {fine}");
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

#[test]
fn block_system_reproduces_affine_data() {
    let dm = plain(4);
    let mesh = &dm.mesh;
    let a = CoefficientField::block_diagonal(vec![1.0, 3.0]).unwrap();
    let g = |x: [f64; 2], out: &mut [f64]| {
        out[0] = 1.0 + 2.0 * x[0] - x[1];
        out[1] = -0.5 * x[0] + 4.0 * x[1];
    };
    let cons = Constraints::dirichlet(mesh.n_vertices(), 2, &dm.boundary_vertices(), |v, out| g(mesh.vertices[v], out));
    let sys = assemble(mesh, &a, 1.0, &ContrastWeight::new(1.0).unwrap(), None, cons).unwrap();
    let u = solve(sys, SolverOptions::default()).unwrap();
    let mut want = [0.0; 2];
    for (v, &x) in mesh.vertices.iter().enumerate() {
        g(x, &mut want);
        assert!((u.value(v, 0) - want[0]).abs() < 1e-10 && (u.value(v, 1) - want[1]).abs() < 1e-10);
    }
    let _: &Arc<Mesh> = u.mesh();
}
