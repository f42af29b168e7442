use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::cell::HomogenizedTensor;
use crate::error::{LabError, Result};
use crate::fem::{assemble, solve, CoefficientField, Constraints, ContrastWeight, FemFunction, SolverOptions};
use crate::geometry::{build_perforated_mesh, DomainMesh, DomainType, InclusionShape, Region};

/// Smooth vector field on Ω used for sources and boundary data.
#[derive(Clone)]
pub struct DataField {
    m: usize,
    label: String,
    eval: Arc<dyn Fn([f64; 2], &mut [f64]) + Send + Sync>,
}

impl fmt::Debug for DataField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DataField({}, m = {})", self.label, self.m)
    }
}

impl DataField {
    pub fn from_fn(m: usize, label: impl Into<String>, eval: impl Fn([f64; 2], &mut [f64]) + Send + Sync + 'static) -> Self {
        DataField { m, label: label.into(), eval: Arc::new(eval) }
    }

    pub fn zero(m: usize) -> Self {
        Self::from_fn(m, "zero", |_, out| out.fill(0.0))
    }

    pub fn constant(m: usize, c: f64) -> Self {
        Self::from_fn(m, format!("constant {c}"), move |_, out| out.fill(c))
    }

    /// sin(πx₁) sin(πx₂) in every component.
    pub fn sin_sin(m: usize) -> Self {
        Self::from_fn(m, "sin-sin", |x, out| out.fill((PI * x[0]).sin() * (PI * x[1]).sin()))
    }

    /// x₁x₂ in every component.
    pub fn product(m: usize) -> Self {
        Self::from_fn(m, "x1*x2", |x, out| out.fill(x[0] * x[1]))
    }

    /// c₀ + c₁x₁ + c₂x₂ in every component.
    pub fn affine(m: usize, c: [f64; 3]) -> Self {
        Self::from_fn(m, "affine", move |x, out| out.fill(c[0] + c[1] * x[0] + c[2] * x[1]))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: [f64; 2], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let inner = self.eval.clone();
        Self::from_fn(self.m, format!("{a}*{}", self.label), move |x, out| {
            inner(x, out);
            out.iter_mut().for_each(|v| *v *= a);
        })
    }
}

/// One heterogeneous Dirichlet problem on a perforated unit square.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub coef: CoefficientField,
    pub shape: InclusionShape,
    pub eps: f64,
    pub kappa: f64,
    pub delta: f64,
    pub m_ref: usize,
    pub kind: DomainType,
    pub f: DataField,
    pub g: DataField,
    /// Scale the source by δ inside the inclusions when δ < 1.
    pub modify_f: bool,
}

impl ProblemSpec {
    /// Scalar reference problem: f = sin πx₁ sin πx₂, g = x₁x₂, κ = 0.1, Type II.
    pub fn reference(coef: CoefficientField, shape: InclusionShape, eps: f64, delta: f64, m_ref: usize) -> Self {
        let m = coef.m();
        ProblemSpec {
            coef,
            shape,
            eps,
            kappa: 0.1,
            delta,
            m_ref,
            kind: DomainType::TypeII,
            f: DataField::sin_sin(m),
            g: DataField::product(m),
            modify_f: delta < 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ContrastWeight::new(self.delta)?;
        let m = self.coef.m();
        if self.f.m() != m || self.g.m() != m {
            return Err(LabError::invalid(format!(
                "data fields have {} and {} components, coefficient has {m}",
                self.f.m(),
                self.g.m()
            )));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<DomainMesh> {
        self.validate()?;
        build_perforated_mesh(self.shape, self.eps, self.kappa, self.m_ref, self.kind)
    }

    /// Whether the inclusion source is scaled by δ.
    pub fn source_is_modified(&self) -> bool {
        self.modify_f && self.delta < 1.0
    }

    /// f, or δf on the inclusions when the modification is active.
    pub fn effective_source(&self, x: [f64; 2], region: Region, out: &mut [f64]) {
        self.f.eval(x, out);
        if self.source_is_modified() && region == Region::Inclusion {
            out.iter_mut().for_each(|v| *v *= self.delta);
        }
    }
}

fn dirichlet_on_boundary(dm: &DomainMesh, g: &DataField) -> Constraints {
    let mesh = &dm.mesh;
    Constraints::dirichlet(mesh.n_vertices(), g.m(), &dm.boundary_vertices(), |v, out| g.eval(mesh.vertices[v], out))
}

/// u with −div(Λ A(x/ε)∇u) = f (or f_{ε,δ}) in Ω, u = g on ∂Ω.
pub fn solve_heterogeneous(spec: &ProblemSpec, dm: &DomainMesh, opts: SolverOptions) -> Result<FemFunction> {
    spec.validate()?;
    let w = ContrastWeight::new(spec.delta)?;
    let src = |x: [f64; 2], r: Region, out: &mut [f64]| spec.effective_source(x, r, out);
    let sys = assemble(&dm.mesh, &spec.coef, dm.epsilon, &w, Some(&src), dirichlet_on_boundary(dm, &spec.g))?;
    solve(sys, opts)
}

/// Constant-coefficient problem with Â on the same mesh (regions only enter
/// through the source when it is modified).
pub fn solve_homogenized(ahat: &HomogenizedTensor, spec: &ProblemSpec, dm: &DomainMesh, opts: SolverOptions) -> Result<FemFunction> {
    spec.validate()?;
    if ahat.mu1 <= 0.0 {
        return Err(LabError::invalid("homogenized tensor is not elliptic"));
    }
    let coef = ahat.as_coefficient();
    let src = |x: [f64; 2], r: Region, out: &mut [f64]| spec.effective_source(x, r, out);
    let sys = assemble(&dm.mesh, &coef, 1.0, &ContrastWeight::new(1.0)?, Some(&src), dirichlet_on_boundary(dm, &spec.g))?;
    solve(sys, opts)
}

/// v solving −div(A(x/ε)∇v) = f in each inclusion with v = 0 on its
/// boundary; v ≡ 0 on the matrix.
pub fn aux_inverse(spec: &ProblemSpec, dm: &DomainMesh, opts: SolverOptions) -> Result<FemFunction> {
    spec.validate()?;
    let mesh = &dm.mesh;
    let m = spec.coef.m();
    let touches_matrix = mesh.vertices_touching(Region::Matrix);
    let fixed: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| touches_matrix[v]).collect();
    if fixed.len() == mesh.n_vertices() {
        return Ok(FemFunction::zeros(mesh.clone(), m));
    }
    let cons = Constraints::dirichlet(mesh.n_vertices(), m, &fixed, |_, out| out.fill(0.0));
    let src = |x: [f64; 2], r: Region, out: &mut [f64]| {
        if r == Region::Inclusion {
            spec.f.eval(x, out);
        } else {
            out.fill(0.0);
        }
    };
    let sys = assemble(mesh, &spec.coef, dm.epsilon, &ContrastWeight::new(1.0)?, Some(&src), cons)?;
    solve(sys, opts)
}
