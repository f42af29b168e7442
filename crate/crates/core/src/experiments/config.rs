//! JSON run configuration. Unknown keys are rejected and every error names
//! the offending key path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fem::{CoefficientField, SolverOptions};
use crate::geometry::{DomainType, InclusionShape};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub coefficient: CoefficientConfig,
    pub delta_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub mesh: MeshConfig,
    pub solver: SolverOptions,
    pub outputs: OutputConfig,
    /// Source scaling inside soft inclusions; `None` means "on for δ < 1".
    pub modify_f: Option<bool>,
    pub assertions: Assertions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub shape: ShapeConfig,
    pub kappa: f64,
    pub domain: DomainKind,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { shape: ShapeConfig::Square { r: 0.25 }, kappa: 0.1, domain: DomainKind::Type2 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeConfig {
    Square { r: f64 },
    Disk { r: f64 },
}

impl From<ShapeConfig> for InclusionShape {
    fn from(s: ShapeConfig) -> Self {
        match s {
            ShapeConfig::Square { r } => InclusionShape::Square { r },
            ShapeConfig::Disk { r } => InclusionShape::Disk { r },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Type1,
    Type2,
}

impl From<DomainKind> for DomainType {
    fn from(k: DomainKind) -> Self {
        match k {
            DomainKind::Type1 => DomainType::TypeI,
            DomainKind::Type2 => DomainType::TypeII,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Identity {
        #[serde(default = "one")]
        m: usize,
    },
    /// 1 + ½ sin(2πy₁) sin(2πy₂), scalar.
    #[default]
    Oscillating,
    /// Constant isotropic blocks c_α δ_ij δ^{αβ}.
    BlockDiagonal { c: Vec<f64> },
}

fn one() -> usize {
    1
}

impl CoefficientConfig {
    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            CoefficientConfig::Identity { m } => {
                if *m == 0 {
                    return Err(LabError::invalid("coefficient.m must be positive"));
                }
                Ok(CoefficientField::identity(*m))
            }
            CoefficientConfig::Oscillating => Ok(CoefficientField::oscillating()),
            CoefficientConfig::BlockDiagonal { c } => CoefficientField::block_diagonal(c.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Triangles per cell edge on the domain mesh is 4·m_ref.
    pub m_ref: usize,
    /// Cell-problem grid; defaults to 4·m_ref so both grids align.
    pub cell_n: Option<usize>,
    pub mollifier_points: usize,
    /// Also run at m_ref/2 and report the relative change of the corrected error.
    pub resolution_check: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { m_ref: 8, cell_n: None, mollifier_points: 8, resolution_check: false }
    }
}

impl MeshConfig {
    pub fn cell_n(&self) -> usize {
        self.cell_n.unwrap_or(4 * self.m_ref)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: String,
    pub summary: String,
    pub acceptance_csv: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { csv: "runs.csv".into(), summary: "summary.json".into(), acceptance_csv: "acceptance.csv".into() }
    }
}

/// Which checks a run must pass for a zero exit.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Assertions {
    /// Acceptance criteria (1..=10) to run after the grid.
    pub criteria: Vec<u8>,
    /// Assert the grid's ε-slope, P/Q/R slope and δ-ratio against the tolerances.
    pub grid: bool,
    pub tolerances: Tolerances,
}

/// Every numeric threshold used by the acceptance checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub limit_slope: [f64; 2],
    pub limit_r2: f64,
    pub second_order_slope: [f64; 2],
    pub ellipticity_factor: f64,
    /// min eig Â_{δ*} over the reference sweep, frozen.
    pub ellipticity_baseline: f64,
    pub monotonicity: f64,
    pub continuity_slope_min: f64,
    pub flux_divergence_max: f64,
    pub psi_ratio_max: f64,
    pub np_bound: f64,
    pub self_adjoint_max: f64,
    pub jump_max: f64,
    pub representation_max: f64,
    pub eps_slope_min: f64,
    pub delta_ratio_max: f64,
    pub pqr_slope_min: f64,
    pub resolution_max: f64,
    pub lipschitz_factor: f64,
    pub area: f64,
    pub norm_oracle: f64,
    /// Wall-clock budgets in seconds for criteria 1, 6 and 7.
    pub budget_soft: f64,
    pub budget_representation: f64,
    pub budget_theorem: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            limit_slope: [0.85, 1.15],
            limit_r2: 0.99,
            second_order_slope: [1.7, 2.3],
            ellipticity_factor: 0.9,
            ellipticity_baseline: 0.578_765_692_528_393,
            monotonicity: 1e-10,
            continuity_slope_min: 0.85,
            flux_divergence_max: 1e-8,
            psi_ratio_max: 5.0,
            np_bound: 0.499,
            self_adjoint_max: 1e-9,
            jump_max: 1e-8,
            representation_max: 0.05,
            eps_slope_min: 0.45,
            delta_ratio_max: 3.0,
            pqr_slope_min: 0.45,
            resolution_max: 0.2,
            lipschitz_factor: 4.0,
            area: 1e-12,
            norm_oracle: 1e-13,
            budget_soft: 60.0,
            budget_representation: 120.0,
            budget_theorem: 600.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = if inner.is_syntax() || inner.is_eof() {
                format!("line {} column {}: {inner}", inner.line(), inner.column())
            } else {
                inner.to_string()
            };
            LabError::Config { path, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Err(LabError::Config { path: path.into(), message });
        for (k, &d) in self.delta_grid.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return bad(&format!("delta_grid[{k}]"), format!("contrast must be positive and finite, got {d}"));
            }
        }
        for (k, &e) in self.eps_grid.iter().enumerate() {
            let inv = 1.0 / e;
            if !(e > 0.0 && e <= 0.5 && (inv - inv.round()).abs() < 1e-9) {
                return bad(&format!("eps_grid[{k}]"), format!("ε must be 1/k with k ≥ 2, got {e}"));
            }
        }
        if self.mesh.m_ref == 0 {
            return bad("mesh.m_ref", "must be positive".into());
        }
        if self.mesh.mollifier_points == 0 {
            return bad("mesh.mollifier_points", "must be positive".into());
        }
        if let Some(&c) = self.assertions.criteria.iter().find(|c| !(1..=10).contains(*c)) {
            return bad("assertions.criteria", format!("criterion {c} does not exist (1..=10)"));
        }
        self.coefficient.build().map_err(|e| LabError::Config { path: "coefficient".into(), message: e.to_string() })?;
        Ok(())
    }
}
