//! Least-squares rate fits on trajectory series.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} samples after the start time, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("value at t = {t} is not positive ({value})")]
    NonPositive { t: f64, value: f64 },
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// `log value ≈ intercept − rate·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// `log value ≈ intercept + slope·log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(points: &[(f64, f64)]) -> Line {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 1e-24 * n * (1.0 + my * my) { 1.0 - sse / syy } else { 1.0 };
    Line { slope, intercept, r_squared }
}

fn log_points(series: &[(f64, f64)], keep: impl Fn(f64) -> bool, log_t: bool) -> Result<Vec<(f64, f64)>, FitError> {
    let mut points = Vec::new();
    for &(t, v) in series.iter().filter(|(t, _)| keep(*t)) {
        if !(v > 0.0) {
            return Err(FitError::NonPositive { t, value: v });
        }
        points.push((if log_t { t.ln() } else { t }, v.ln()));
    }
    if points.len() < MIN_FIT_SAMPLES {
        return Err(FitError::InsufficientSamples { needed: MIN_FIT_SAMPLES, got: points.len() });
    }
    Ok(points)
}

/// Exponential rate from samples with `t ≥ t_start`; positive means decay.
pub fn fit_decay_rate(series: &[(f64, f64)], t_start: f64) -> Result<DecayFit, FitError> {
    fit_decay_rate_between(series, t_start, f64::INFINITY)
}

pub fn fit_decay_rate_between(series: &[(f64, f64)], t_start: f64, t_end: f64) -> Result<DecayFit, FitError> {
    let points = log_points(series, |t| t >= t_start && t <= t_end, false)?;
    let line = least_squares(&points);
    Ok(DecayFit { rate: -line.slope, intercept: line.intercept, r_squared: line.r_squared, samples: points.len() })
}

/// Log-log slope over `t_start ≤ t ≤ t_end` (`t > 0`).
pub fn fit_power_law(series: &[(f64, f64)], t_start: f64, t_end: f64) -> Result<PowerFit, FitError> {
    let points = log_points(series, |t| t > 0.0 && t >= t_start && t <= t_end, true)?;
    let line = least_squares(&points);
    Ok(PowerFit { slope: line.slope, intercept: line.intercept, r_squared: line.r_squared, samples: points.len() })
}
