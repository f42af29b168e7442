use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Free,
    Dirichlet,
    /// Torus identification; `pinned` fixes one DOF per component to remove
    /// the constant kernel (mean-zero is restored after the solve).
    Periodic { pinned: bool },
    Custom,
}

/// Affine parametrization x = P z + x₀ of the nodal DOF vector (node-major,
/// index `node*m + component`). Each nodal DOF is either tied to one reduced
/// unknown or fixed to its offset.
#[derive(Clone, Debug)]
pub struct Constraints {
    m: usize,
    slot: Vec<Option<usize>>,
    offset: Vec<f64>,
    n_reduced: usize,
    kind: ConstraintKind,
}

impl Constraints {
    pub fn from_parts(m: usize, slot: Vec<Option<usize>>, offset: Vec<f64>, kind: ConstraintKind) -> Result<Self> {
        if m == 0 || slot.len() % m != 0 {
            return Err(LabError::Constraints(format!("{} slots do not split into {m} components", slot.len())));
        }
        if slot.len() != offset.len() {
            return Err(LabError::Constraints("slot and offset lengths differ".into()));
        }
        let n_reduced = slot.iter().flatten().map(|&r| r + 1).max().unwrap_or(0);
        let mut used = vec![false; n_reduced];
        for &r in slot.iter().flatten() {
            used[r] = true;
        }
        if let Some(r) = used.iter().position(|&u| !u) {
            return Err(LabError::Constraints(format!("reduced unknown {r} is referenced by no DOF")));
        }
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Constraints("non-finite offset".into()));
        }
        Ok(Constraints { m, slot, offset, n_reduced, kind })
    }

    pub fn free(n_vertices: usize, m: usize) -> Self {
        let n = n_vertices * m;
        Constraints { m, slot: (0..n).map(Some).collect(), offset: vec![0.0; n], n_reduced: n, kind: ConstraintKind::Free }
    }

    /// Fixes every component at the listed vertices to `g(vertex)`.
    pub fn dirichlet(n_vertices: usize, m: usize, fixed: &[usize], g: impl Fn(usize, &mut [f64])) -> Self {
        let mut is_fixed = vec![false; n_vertices];
        for &v in fixed {
            is_fixed[v] = true;
        }
        let mut slot = vec![None; n_vertices * m];
        let mut offset = vec![0.0; n_vertices * m];
        let mut next = 0;
        for v in 0..n_vertices {
            if is_fixed[v] {
                g(v, &mut offset[v * m..(v + 1) * m]);
            } else {
                for a in 0..m {
                    slot[v * m + a] = Some(next);
                    next += 1;
                }
            }
        }
        Constraints { m, slot, offset, n_reduced: next, kind: ConstraintKind::Dirichlet }
    }

    /// Torus DOFs from a vertex → master map.
    pub fn periodic(periodic_map: &[usize], m: usize, pin: bool) -> Self {
        let nv = periodic_map.len();
        let mut master_slot = vec![usize::MAX; nv];
        let mut next = 0;
        let mut pinned = None;
        for v in 0..nv {
            if periodic_map[v] == v {
                if pin && pinned.is_none() {
                    pinned = Some(v);
                    continue;
                }
                master_slot[v] = next;
                next += m;
            }
        }
        let mut slot = vec![None; nv * m];
        for v in 0..nv {
            let mv = periodic_map[v];
            if Some(mv) == pinned {
                continue;
            }
            for a in 0..m {
                slot[v * m + a] = Some(master_slot[mv] + a);
            }
        }
        Constraints { m, slot, offset: vec![0.0; nv * m], n_reduced: next, kind: ConstraintKind::Periodic { pinned: pin } }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn n_reduced(&self) -> usize {
        self.n_reduced
    }

    pub fn n_nodal(&self) -> usize {
        self.slot.len()
    }

    pub fn slot(&self, dof: usize) -> Option<usize> {
        self.slot[dof]
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Same tying pattern with a different fixed part.
    pub fn with_offset(&self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.slot.len() {
            return Err(LabError::Constraints("offset length mismatch".into()));
        }
        Ok(Constraints { offset, ..self.clone() })
    }

    /// Pᵀ v.
    pub fn reduce(&self, nodal: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n_reduced];
        for (d, s) in self.slot.iter().enumerate() {
            if let Some(r) = *s {
                z[r] += nodal[d];
            }
        }
        z
    }

    /// P z + x₀.
    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        self.slot
            .iter()
            .zip(&self.offset)
            .map(|(s, &o)| match *s {
                Some(r) => z[r] + o,
                None => o,
            })
            .collect()
    }

    /// P z without the offset.
    pub fn expand_homogeneous(&self, z: &[f64]) -> Vec<f64> {
        self.slot.iter().map(|s| s.map_or(0.0, |r| z[r])).collect()
    }
}
