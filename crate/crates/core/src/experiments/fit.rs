//! Least-squares power laws in log-log space.

use serde::Serialize;

use crate::error::{Error, Result};

/// `y ~ prefactor * x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of `ln y` about the fitted line.
    pub rms_residual: f64,
    pub points: usize,
}

impl PowerFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }

    /// The `x` at which the fit reaches `y`.
    pub fn solve(&self, y: f64) -> f64 {
        (y / self.prefactor).powf(1.0 / self.exponent)
    }
}

/// Fits a power law through positive `(x, y)` pairs; needs two or more.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if x.len() != y.len() || pts.len() < 2 || pts.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Fit(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit(pts.len()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum();
    Ok(PowerFit {
        exponent,
        prefactor: intercept.exp(),
        rms_residual: (rss / n).sqrt(),
        points: pts.len(),
    })
}
