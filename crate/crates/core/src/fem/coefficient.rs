use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{LabError, Result};

type TensorFn = dyn Fn([f64; 2], &mut [f64]) + Send + Sync;

/// Y-periodic coefficient tensor a_{ij}^{αβ}(y), d = 2.
///
/// The tensor is a (2m)×(2m) row-major matrix; row (i, α) sits at `i*m + α`
/// and column (j, β) at `j*m + β`.
#[derive(Clone)]
pub struct CoefficientField {
    m: usize,
    mu: f64,
    holder: Option<(f64, f64)>,
    symmetric: bool,
    label: String,
    eval: Arc<TensorFn>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("m", &self.m)
            .field("mu", &self.mu)
            .finish()
    }
}

#[inline]
pub fn tensor_index(m: usize, i: usize, alpha: usize, j: usize, beta: usize) -> usize {
    (i * m + alpha) * (2 * m) + (j * m + beta)
}

impl CoefficientField {
    pub fn from_fn(
        m: usize,
        mu: f64,
        symmetric: bool,
        label: impl Into<String>,
        eval: impl Fn([f64; 2], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        CoefficientField { m, mu, holder: None, symmetric, label: label.into(), eval: Arc::new(eval) }
    }

    /// δ_ij δ^{αβ}.
    pub fn identity(m: usize) -> Self {
        let mut c = Self::from_fn(m, 1.0, true, "identity", move |_, out| {
            out.fill(0.0);
            for p in 0..2 * m {
                out[p * (2 * m) + p] = 1.0;
            }
        });
        c.holder = Some((1.0, 0.0));
        c
    }

    /// Scalar a(y) = 1 + ½ sin(2πy₁) sin(2πy₂), μ = 1/2.
    pub fn oscillating() -> Self {
        let mut c = Self::from_fn(1, 0.5, true, "oscillating", |y, out| {
            let a = 1.0 + 0.5 * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).sin();
            out[0] = a;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = a;
        });
        c.holder = Some((1.0, PI));
        c
    }

    /// Decoupled system: a_{ij}^{αβ} = c_α δ_ij δ^{αβ}.
    pub fn block_diagonal(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(LabError::invalid("block coefficients must be positive"));
        }
        let m = c.len();
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(0.0, f64::max);
        let mu = lo.min(1.0 / hi);
        let mut field = Self::from_fn(m, mu, true, "block-diagonal", move |_, out| {
            out.fill(0.0);
            for i in 0..2 {
                for (a, &v) in c.iter().enumerate() {
                    out[tensor_index(m, i, a, i, a)] = v;
                }
            }
        });
        field.holder = Some((1.0, 0.0));
        Ok(field)
    }

    pub fn with_holder(mut self, exponent: f64, seminorm: f64) -> Self {
        self.holder = Some((exponent, seminorm));
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn holder(&self) -> Option<(f64, f64)> {
        self.holder
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tensor_len(&self) -> usize {
        4 * self.m * self.m
    }

    pub fn evaluate_into(&self, y: [f64; 2], out: &mut [f64]) {
        (self.eval)(y, out)
    }

    pub fn evaluate(&self, y: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.tensor_len()];
        self.evaluate_into(y, &mut out);
        out
    }

    /// Symmetry, ellipticity within [μ, 1/μ] and unit periodicity at the
    /// given sample points.
    pub fn check_samples(&self, points: &[[f64; 2]]) -> Result<()> {
        let n = 2 * self.m;
        for &y in points {
            let a = self.evaluate(y);
            let shifted = self.evaluate([y[0] + 1.0, y[1] - 1.0]);
            if a.iter().zip(&shifted).any(|(p, q)| (p - q).abs() > 1e-12 * (1.0 + p.abs())) {
                return Err(LabError::invalid(format!("coefficient `{}` is not Y-periodic at {y:?}", self.label)));
            }
            let mat = DMatrix::from_row_slice(n, n, &a);
            if self.symmetric && (&mat - mat.transpose()).abs().max() > 1e-12 {
                return Err(LabError::invalid(format!("coefficient `{}` is not symmetric at {y:?}", self.label)));
            }
            let sym = (&mat + mat.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            if lo < self.mu - 1e-12 || hi > 1.0 / self.mu + 1e-12 {
                return Err(LabError::invalid(format!(
                    "coefficient `{}` violates ellipticity at {y:?}: spectrum [{lo}, {hi}], mu = {}",
                    self.label, self.mu
                )));
            }
        }
        Ok(())
    }
}

/// Contrast Λ: δ on inclusion elements, 1 on matrix elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastWeight {
    delta: f64,
}

impl ContrastWeight {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(LabError::invalid(format!("contrast must be in (0, inf), got {delta}")));
        }
        Ok(ContrastWeight { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn value(&self, region: crate::geometry::Region) -> f64 {
        match region {
            crate::geometry::Region::Inclusion => self.delta,
            crate::geometry::Region::Matrix => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<[f64; 2]> {
        (0..49).map(|k| [(k % 7) as f64 / 7.0 - 0.5, (k / 7) as f64 / 7.0 - 0.5]).collect()
    }

    #[test]
    fn builtins_pass_sample_checks() {
        CoefficientField::identity(1).check_samples(&grid()).unwrap();
        CoefficientField::identity(2).check_samples(&grid()).unwrap();
        CoefficientField::oscillating().check_samples(&grid()).unwrap();
        CoefficientField::block_diagonal(vec![1.0, 2.0]).unwrap().check_samples(&grid()).unwrap();
    }

    #[test]
    fn detects_bad_ellipticity() {
        let bad = CoefficientField::from_fn(1, 0.9, true, "bad", |_, out| {
            out.copy_from_slice(&[3.0, 0.0, 0.0, 1.0]);
        });
        assert!(bad.check_samples(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn contrast_rejects_nonpositive() {
        assert!(ContrastWeight::new(0.0).is_err());
        assert!(ContrastWeight::new(-1.0).is_err());
        assert!(ContrastWeight::new(f64::INFINITY).is_err());
        assert_eq!(ContrastWeight::new(10.0).unwrap().value(crate::geometry::Region::Inclusion), 10.0);
    }
}
