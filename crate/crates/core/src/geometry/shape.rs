use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Inclusion ω inside the unit cell Y = (-1/2, 1/2)², centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InclusionShape {
    /// (-r, r)²; fitted exactly by grid lines.
    Square { r: f64 },
    /// Disk of radius r, realized as an inscribed polygon whose vertex count
    /// is fixed by the mesh (8 per grid layer of the mapped core).
    Disk { r: f64 },
}

impl InclusionShape {
    pub fn radius(&self) -> f64 {
        match *self {
            InclusionShape::Square { r } | InclusionShape::Disk { r } => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.radius();
        if !(r > 0.0 && r < 0.5) || !r.is_finite() {
            return Err(LabError::invalid(format!(
                "inclusion radius must lie in (0, 1/2), got {r}"
            )));
        }
        Ok(())
    }

    /// Area of the exact (continuous) shape.
    pub fn exact_area(&self) -> f64 {
        match *self {
            InclusionShape::Square { r } => 4.0 * r * r,
            InclusionShape::Disk { r } => std::f64::consts::PI * r * r,
        }
    }

    /// Half-width of ω along the coordinate axes (both shapes reach exactly r there).
    pub fn axis_extent(&self) -> f64 {
        self.radius()
    }
}

impl fmt::Display for InclusionShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InclusionShape::Square { r } => write!(f, "square:{r}"),
            InclusionShape::Disk { r } => write!(f, "disk:{r}"),
        }
    }
}

impl FromStr for InclusionShape {
    type Err = LabError;

    /// `square:0.25` or `disk:0.3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, r) = s
            .split_once(':')
            .ok_or_else(|| LabError::invalid(format!("shape `{s}` is not of the form kind:r")))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| LabError::invalid(format!("bad radius in shape `{s}`")))?;
        let shape = match kind.trim() {
            "square" => InclusionShape::Square { r },
            "disk" => InclusionShape::Disk { r },
            other => return Err(LabError::invalid(format!("unknown shape kind `{other}`"))),
        };
        shape.validate()?;
        Ok(shape)
    }
}

/// Map of the unit cell that bends the grid square of half-width `s` (in the
/// L∞ norm) onto the disk of radius `r`. Between that square and ∂Y the map
/// blends linearly back to the identity, so it fixes ∂Y pointwise and keeps
/// the coordinate axes and diagonals invariant.
pub(crate) fn disk_cell_map(p: [f64; 2], s: f64, r: f64) -> [f64; 2] {
    let rho = p[0].abs().max(p[1].abs());
    if rho == 0.0 {
        return p;
    }
    let u = [p[0] / rho, p[1] / rho];
    let un = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if rho <= s {
        let k = r * rho / (s * un);
        [k * u[0], k * u[1]]
    } else {
        let t = ((rho - s) / (0.5 - s)).min(1.0);
        let k = (1.0 - t) * r / un + t * 0.5;
        [k * u[0], k * u[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        assert_eq!(
            "square:0.25".parse::<InclusionShape>().unwrap(),
            InclusionShape::Square { r: 0.25 }
        );
        assert_eq!(
            "disk:0.3".parse::<InclusionShape>().unwrap(),
            InclusionShape::Disk { r: 0.3 }
        );
        assert!("disk:0".parse::<InclusionShape>().is_err());
        assert!("square:0.5".parse::<InclusionShape>().is_err());
        assert!("hex:0.2".parse::<InclusionShape>().is_err());
    }

    #[test]
    fn disk_map_fixes_cell_boundary_and_hits_circle() {
        let (s, r) = (19.0 / 64.0, 0.3);
        for k in 0..=20 {
            let t = -0.5 + k as f64 / 20.0;
            for p in [[0.5, t], [t, -0.5]] {
                let q = disk_cell_map(p, s, r);
                assert!((q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15);
            }
            let q = disk_cell_map([s, t * 2.0 * s], s, r);
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - r).abs() < 1e-14);
        }
        let q = disk_cell_map([0.0, 0.4], s, r);
        assert_eq!(q[0], 0.0);
    }
}
