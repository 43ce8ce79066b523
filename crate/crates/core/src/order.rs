//! Least-squares convergence orders on log-log data.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual of `log(error)` about the fitted line.
    pub max_residual: f64,
    /// Points dropped because their error was not positive and finite.
    pub excluded: Vec<(f64, f64)>,
    pub used: usize,
}

/// Fits `log(error) = slope * log(eps) + c` by least squares.
pub fn fit_order(ladder: &[(f64, f64)]) -> Result<OrderFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for &(eps, err) in ladder {
        if eps > 0.0 && err > 0.0 && eps.is_finite() && err.is_finite() {
            pts.push((eps.ln(), err.ln()));
        } else {
            excluded.push((eps, err));
        }
    }
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 positive points, have {} ({} excluded)",
            pts.len(),
            excluded.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all eps values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0, f64::max);
    Ok(OrderFit {
        slope,
        intercept,
        max_residual,
        excluded,
        used: pts.len(),
    })
}
