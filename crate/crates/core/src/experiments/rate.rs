use serde::Serialize;

use crate::error::{LabError, Result};

/// Least-squares power law e ≈ C p^slope on log-log data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    /// (parameter, error), sorted by parameter.
    pub series: Vec<(f64, f64)>,
    pub slope: f64,
    pub r2: f64,
    /// exp(intercept).
    pub constant: f64,
}

pub fn fit_rate(series: &[(f64, f64)]) -> Result<RateReport> {
    if series.len() < 3 {
        return Err(LabError::invalid(format!("rate fit needs at least 3 points, got {}", series.len())));
    }
    if let Some(&(p, e)) = series.iter().find(|(p, e)| !(*p > 0.0 && *e > 0.0) || !p.is_finite() || !e.is_finite()) {
        return Err(LabError::invalid(format!("rate fit needs positive finite data, got ({p}, {e})")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len() as f64;
    let xs: Vec<f64> = sorted.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = sorted.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::invalid("rate fit needs at least two distinct parameters"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateReport { series: sorted, slope, r2, constant: intercept.exp() })
}
