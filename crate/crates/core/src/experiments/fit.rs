//! Weighted log-log regression of errors against a step parameter.

use serde::Serialize;

/// A level enters the fit only if its error exceeds this many standard errors.
pub const NOISE_FLOOR_FACTOR: f64 = 3.0;
/// Errors at or below this are treated as exact zeros and never fitted.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;
/// Fewest usable points for a fit.
pub const MIN_USABLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    /// Step size or drift scale.
    pub x: f64,
    pub error: f64,
    pub stderr: f64,
}

impl FitPoint {
    pub fn new(x: f64, error: f64, stderr: f64) -> Self {
        FitPoint { x, error, stderr }
    }

    fn usable(&self) -> bool {
        self.x > 0.0
            && self.error.is_finite()
            && self.stderr.is_finite()
            && self.error > ABSOLUTE_FLOOR
            && self.error > NOISE_FLOOR_FACTOR * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    Inconclusive,
}

/// Result of [`fit_order`]. Slope, intercept and residual are absent when
/// fewer than three points clear the noise floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub status: FitStatus,
    pub slope: Option<f64>,
    /// Standard error of the slope under the fitted weights.
    pub slope_stderr: Option<f64>,
    pub intercept: Option<f64>,
    /// Weighted root-mean-square residual in log space.
    pub residual: Option<f64>,
    pub used: Vec<usize>,
    /// Indices of points below the noise floor.
    pub excluded: Vec<usize>,
    pub unit_weights: bool,
}

impl OrderEstimate {
    pub fn is_conclusive(&self) -> bool {
        self.status == FitStatus::Ok
    }
}

/// Fits `log error = intercept + slope · log x` by weighted least squares.
///
/// Weights are `(error/stderr)²`, the inverse variance of `log error` to
/// first order, or all ones when some usable point has zero standard error.
pub fn fit_order(points: &[FitPoint]) -> OrderEstimate {
    let (used, excluded): (Vec<usize>, Vec<usize>) = (0..points.len()).partition(|&i| points[i].usable());
    let unit_weights = used.iter().any(|&i| points[i].stderr == 0.0);
    if used.len() < MIN_USABLE {
        return OrderEstimate {
            status: FitStatus::Inconclusive,
            slope: None,
            slope_stderr: None,
            intercept: None,
            residual: None,
            used,
            excluded,
            unit_weights,
        };
    }
    let rows: Vec<(f64, f64, f64)> = used
        .iter()
        .map(|&i| {
            let p = points[i];
            let w = if unit_weights { 1.0 } else { (p.error / p.stderr).powi(2) };
            (p.x.ln(), p.error.ln(), w)
        })
        .collect();
    let sw: f64 = rows.iter().map(|r| r.2).sum();
    let mx = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let my = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = rows.iter().map(|r| r.2 * (r.1 - intercept - slope * r.0).powi(2)).sum();
    let slope_stderr = if unit_weights { (ssr / (rows.len() as f64 - 2.0) / sxx).sqrt() } else { (1.0 / sxx).sqrt() };
    OrderEstimate {
        status: FitStatus::Ok,
        slope: Some(slope),
        slope_stderr: Some(slope_stderr),
        intercept: Some(intercept),
        residual: Some((ssr / sw).sqrt()),
        used,
        excluded,
        unit_weights,
    }
}
