//! (ε, δ) grid of discrepancy runs, CSV/JSON emission and grid-level checks.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, Tolerances};
use super::rate::{fit_rate, RateReport};
use crate::error::Result;
use crate::lab::{discrepancy, CellData, DiscrepancyOptions, ProblemSpec};

#[derive(Clone, Debug, Serialize)]
pub struct RunRow {
    pub eps: f64,
    pub delta: f64,
    pub m_ref: usize,
    pub modify_f: bool,
    pub h1_error: f64,
    pub uncorrected: f64,
    pub interior_error: f64,
    pub p_l2: f64,
    pub q_l2: f64,
    pub r_l2: f64,
    /// ‖P‖ + ‖Q‖ + ε‖R‖.
    pub pqr: f64,
    pub aux_norm: f64,
    pub grad_sup: f64,
    pub resolution_ratio: Option<f64>,
    /// False flags a run where the corrector made things worse.
    pub corrector_helps: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaSummary {
    pub delta: f64,
    pub h1_rate: Option<RateReport>,
    pub pqr_rate: Option<RateReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsSummary {
    pub eps: f64,
    /// max_δ / min_δ of the corrected error.
    pub delta_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    pub rows: Vec<RunRow>,
    pub per_delta: Vec<DeltaSummary>,
    pub per_eps: Vec<EpsSummary>,
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Runs every (ε, δ) pair of the config on the current rayon pool.
pub fn run_grid(cfg: &RunConfig) -> Result<GridResult> {
    cfg.validate()?;
    let coef = cfg.coefficient.build()?;
    let shape = cfg.geometry.shape.into();
    let deltas = sorted_unique(&cfg.delta_grid);
    let epss = sorted_unique(&cfg.eps_grid);
    let opts = DiscrepancyOptions {
        solver: cfg.solver,
        mollifier_points: cfg.mesh.mollifier_points,
        // Recorded, judged later against the tolerance.
        resolution_limit: cfg.mesh.resolution_check.then_some(f64::INFINITY),
    };

    let mut rows = Vec::new();
    if !epss.is_empty() {
        for &delta in &deltas {
            log::info!("cell problems at δ = {delta}");
            let cell = CellData::compute(&coef, shape, cfg.mesh.cell_n(), delta, cfg.solver)?;
            let batch: Vec<RunRow> = epss
                .par_iter()
                .map(|&eps| {
                    let mut spec = ProblemSpec::reference(coef.clone(), shape, eps, delta, cfg.mesh.m_ref);
                    spec.kappa = cfg.geometry.kappa;
                    spec.kind = cfg.geometry.domain.into();
                    spec.modify_f = cfg.modify_f.unwrap_or(delta < 1.0);
                    let r = discrepancy(&spec, &cell, &opts)?;
                    log::info!("ε = {eps}, δ = {delta}: corrected {:.4e}, uncorrected {:.4e}", r.h1_error, r.uncorrected_error);
                    Ok(RunRow {
                        eps,
                        delta,
                        m_ref: r.m_ref,
                        modify_f: r.modify_f,
                        h1_error: r.h1_error,
                        uncorrected: r.uncorrected_error,
                        interior_error: r.interior_error,
                        p_l2: r.p_l2,
                        q_l2: r.q_l2,
                        r_l2: r.r_l2,
                        pqr: r.pqr(),
                        aux_norm: r.aux_norm,
                        grad_sup: r.grad_sup,
                        resolution_ratio: r.resolution_ratio,
                        corrector_helps: r.h1_error <= r.uncorrected_error,
                    })
                })
                .collect::<Result<_>>()?;
            rows.extend(batch);
        }
    }
    rows.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.eps.total_cmp(&b.eps)));
    for r in rows.iter().filter(|r| !r.corrector_helps && r.eps <= 0.125) {
        log::warn!("corrector increases the error at ε = {}, δ = {}", r.eps, r.delta);
    }

    let per_delta = deltas
        .iter()
        .map(|&delta| {
            let sel: Vec<&RunRow> = rows.iter().filter(|r| r.delta == delta).collect();
            let h1: Vec<(f64, f64)> = sel.iter().map(|r| (r.eps, r.h1_error)).collect();
            let pqr: Vec<(f64, f64)> = sel.iter().map(|r| (r.eps, r.pqr)).collect();
            DeltaSummary { delta, h1_rate: fit_rate(&h1).ok(), pqr_rate: fit_rate(&pqr).ok() }
        })
        .collect();
    let per_eps = epss
        .iter()
        .filter_map(|&eps| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.eps == eps).map(|r| r.h1_error).collect();
            if errs.len() < 2 {
                return None;
            }
            let max = errs.iter().cloned().fold(f64::MIN, f64::max);
            let min = errs.iter().cloned().fold(f64::MAX, f64::min);
            Some(EpsSummary { eps, delta_ratio: max / min })
        })
        .collect();
    Ok(GridResult { rows, per_delta, per_eps })
}

const HEADER: [&str; 18] = [
    "row",
    "eps",
    "delta",
    "h1_error",
    "uncorrected",
    "P_l2",
    "Q_l2",
    "R_l2",
    "aux_norm",
    "grad_sup",
    "m_ref",
    "modify_f",
    "interior_error",
    "resolution_ratio",
    "corrector_helps",
    "h1_slope",
    "pqr_slope",
    "delta_ratio",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl GridResult {
    /// Run rows, then one slope row per δ and one ratio row per ε.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record([
                "run".to_string(),
                r.eps.to_string(),
                r.delta.to_string(),
                r.h1_error.to_string(),
                r.uncorrected.to_string(),
                r.p_l2.to_string(),
                r.q_l2.to_string(),
                r.r_l2.to_string(),
                r.aux_norm.to_string(),
                r.grad_sup.to_string(),
                r.m_ref.to_string(),
                r.modify_f.to_string(),
                r.interior_error.to_string(),
                opt(r.resolution_ratio),
                r.corrector_helps.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        for s in &self.per_delta {
            let mut rec = vec![String::new(); HEADER.len()];
            rec[0] = "slope".into();
            rec[2] = s.delta.to_string();
            rec[15] = opt(s.h1_rate.as_ref().map(|r| r.slope));
            rec[16] = opt(s.pqr_rate.as_ref().map(|r| r.slope));
            w.write_record(&rec)?;
        }
        for s in &self.per_eps {
            let mut rec = vec![String::new(); HEADER.len()];
            rec[0] = "delta_ratio".into();
            rec[1] = s.eps.to_string();
            rec[17] = s.delta_ratio.to_string();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
    }

    pub fn write(&self, cfg: &RunConfig, checks: &[Check], dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&cfg.outputs.csv), self.to_csv()?)?;
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a RunConfig,
            grid: &'a GridResult,
            checks: &'a [Check],
        }
        let mut f = std::fs::File::create(dir.join(&cfg.outputs.summary))?;
        serde_json::to_writer_pretty(&mut f, &Summary { config: cfg, grid: self, checks })?;
        writeln!(f)?;
        Ok(())
    }

    /// Slope, δ-uniformity and resolution checks on the grid.
    pub fn checks(&self, tol: &Tolerances) -> Vec<Check> {
        let mut out = self.rate_checks(tol);
        out.extend(self.uniformity_checks(tol));
        out.extend(self.pqr_checks(tol));
        out.extend(self.resolution_checks(tol));
        out
    }

    pub fn rate_checks(&self, tol: &Tolerances) -> Vec<Check> {
        self.per_delta
            .iter()
            .map(|s| slope_check(format!("corrected-error slope at δ = {}", s.delta), s.h1_rate.as_ref(), tol.eps_slope_min))
            .collect()
    }

    pub fn pqr_checks(&self, tol: &Tolerances) -> Vec<Check> {
        self.per_delta
            .iter()
            .map(|s| slope_check(format!("P/Q/R slope at δ = {}", s.delta), s.pqr_rate.as_ref(), tol.pqr_slope_min))
            .collect()
    }

    pub fn uniformity_checks(&self, tol: &Tolerances) -> Vec<Check> {
        self.per_eps
            .iter()
            .map(|s| Check {
                name: format!("δ-uniformity at ε = {}", s.eps),
                passed: s.delta_ratio <= tol.delta_ratio_max,
                detail: format!("max/min {:.3} (max {})", s.delta_ratio, tol.delta_ratio_max),
            })
            .collect()
    }

    pub fn resolution_checks(&self, tol: &Tolerances) -> Vec<Check> {
        self.rows
            .iter()
            .filter_map(|r| {
                r.resolution_ratio.map(|ratio| Check {
                    name: format!("resolution at ε = {}, δ = {}", r.eps, r.delta),
                    passed: ratio <= tol.resolution_max,
                    detail: format!("|e(m) − e(m/2)|/e(m) = {:.3} (max {})", ratio, tol.resolution_max),
                })
            })
            .collect()
    }
}

fn slope_check(name: String, rate: Option<&RateReport>, min: f64) -> Check {
    match rate {
        Some(r) => Check { name, passed: r.slope >= min, detail: format!("slope {:.3} (min {min})", r.slope) },
        None => Check { name, passed: false, detail: "no fit (need ≥ 3 positive points)".into() },
    }
}
