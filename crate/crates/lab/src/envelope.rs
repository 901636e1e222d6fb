//! Delayed decay envelopes and corridor probes.

use hyperdelay_core::chartimes::{crossing_window, dominant_group, TimesError};
use hyperdelay_core::solver::{Bump, BumpShape, Trajectory};
use hyperdelay_core::{EigenStructure, UndampedRegion};
use thiserror::Error;

/// Multiplier applied to the largest ratio seen in the reference run.
pub const CALIBRATION_SAFETY: f64 = 1.1;
pub const ENVELOPE_SLACK: f64 = 0.05;
pub const ONSET_EPS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("calibration needs a reference trajectory with nonzero initial data")]
    MissingCalibration,
    #[error("probe needs initial data")]
    NoInitialData,
    #[error(transparent)]
    Times(#[from] TimesError),
}

/// Envelope constants measured on a fully damped run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub gamma: f64,
    /// `C` in `‖V^h(t)‖ ≤ C e^{−γt} ‖V₀‖`.
    pub c_high: f64,
    /// `C` in `‖V^ℓ(t)‖_∞ ≤ C t^{−1/2} ‖V₀‖_{L¹}`.
    pub c_low: f64,
}

impl Calibration {
    pub fn scaled(self, factor: f64) -> Self {
        Self { c_high: self.c_high * factor, c_low: self.c_low * factor, ..self }
    }
}

pub fn calibrate(reference: &Trajectory, gamma: f64) -> Result<Calibration, EnvelopeError> {
    let first = reference.initial().ok_or(EnvelopeError::MissingCalibration)?;
    if !(first.l2_total > 0.0) || !(first.l1 > 0.0) {
        return Err(EnvelopeError::MissingCalibration);
    }
    let high = reference
        .samples
        .iter()
        .map(|s| s.l2_high * (gamma * s.t).exp() / first.l2_total)
        .fold(0.0_f64, f64::max);
    let low = reference
        .samples
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| s.linf_low * s.t.sqrt() / first.l1)
        .fold(0.0_f64, f64::max);
    Ok(Calibration { gamma, c_high: CALIBRATION_SAFETY * high, c_low: CALIBRATION_SAFETY * low })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub calibration: Calibration,
    pub tau_bar: f64,
    pub slack: f64,
    /// Violations are counted from this time on.
    pub check_from: f64,
    /// `(t, log‖V^h(t)‖ − log(C‖V₀‖) + γ(t − τ̄))` per sample.
    pub margins: Vec<(f64, f64)>,
    /// `(t, log‖V^ℓ(t)‖_∞ − log(C‖V₀‖_{L¹}) + ½ log(t − τ̄))` for `t > τ̄`.
    pub low_margins: Vec<(f64, f64)>,
    pub violations: usize,
    pub low_violations: usize,
    pub max_margin: f64,
    pub max_low_margin: f64,
    pub onset: Option<f64>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `‖V^h(t)‖ ≤ C e^{−γ(t−τ̄)} ‖V₀‖` and its low-frequency counterpart
/// from `τ̄ + stride_time` on, with multiplicative slack.
pub fn verify_envelope(
    traj: &Trajectory,
    calibration: Calibration,
    tau_bar: f64,
    slack: f64,
    stride_time: f64,
) -> Result<EnvelopeReport, EnvelopeError> {
    let first = traj.initial().ok_or(EnvelopeError::MissingCalibration)?;
    if !(calibration.c_high > 0.0) {
        return Err(EnvelopeError::MissingCalibration);
    }
    let tolerance = (1.0 + slack).ln();
    let check_from = tau_bar + stride_time;
    let log_high = (calibration.c_high * first.l2_total).ln();
    let log_low = (calibration.c_low * first.l1).ln();

    let margins: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| (s.t, s.l2_high.ln() - log_high + calibration.gamma * (s.t - tau_bar)))
        .collect();
    let low_margins: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t > tau_bar)
        .map(|s| (s.t, s.linf_low.ln() - log_low + 0.5 * (s.t - tau_bar).ln()))
        .collect();

    let checked = |m: &[(f64, f64)]| -> (usize, f64) {
        m.iter()
            .filter(|(t, _)| *t >= check_from - 1e-9 * check_from.abs().max(1.0))
            .fold((0, f64::NEG_INFINITY), |(count, max), &(_, v)| (count + usize::from(v > tolerance), max.max(v)))
    };
    let (violations, max_margin) = checked(&margins);
    let (low_violations, max_low_margin) = checked(&low_margins);

    Ok(EnvelopeReport {
        calibration,
        tau_bar,
        slack,
        check_from,
        margins,
        low_margins,
        violations,
        low_violations,
        max_margin,
        max_low_margin,
        onset: traj.decay_onset(ONSET_EPS),
    })
}

/// Narrow bump on the slowest speed of the dominant sign group, sitting just
/// inside the upstream edge of the undamped region, entering it at `t = 0`.
pub fn corridor_bump(eigs: &EigenStructure, region: &UndampedRegion, width: f64, shape: BumpShape) -> Option<Bump> {
    let group = dominant_group(eigs.lambdas());
    let slowest = *group.last()?;
    let positive = eigs.lambdas().contains(&slowest);
    let lambda = if positive { slowest } else { -slowest };
    let component = eigs.lambdas().iter().position(|&l| l == lambda)?;
    let hull = region.hull();
    let half = match shape {
        BumpShape::Gaussian => 4.0 * width,
        BumpShape::Box | BumpShape::CosineBump => 0.5 * width,
    };
    let center = if positive { hull.lo + half } else { hull.hi - half };
    Some(Bump { component, shape, center, width, amplitude: 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Undamped length over the bump's speed.
    pub tau_slow: f64,
    /// Last time any characteristic through the bump's support leaves the region.
    pub predicted_onset: f64,
    pub onset: Option<f64>,
    pub plateau_ratio: f64,
    pub stride_time: f64,
}

/// Plateau and onset of a corridor run whose first bump rides the region.
pub fn conservation_probe(
    traj: &Trajectory,
    eigs: &EigenStructure,
    region: &UndampedRegion,
    bump: &Bump,
    stride_time: f64,
) -> Result<ProbeReport, EnvelopeError> {
    let first = traj.initial().ok_or(EnvelopeError::NoInitialData)?;
    let lambda = eigs.lambdas()[bump.component];
    let tau_slow = region.total_length() / lambda.abs();
    let half = bump.support_half_width();
    let horizon = (region.hull().len() + 2.0 * half) / lambda.abs() + 1.0;
    let mut predicted_onset = 0.0_f64;
    for edge in [bump.center - half, bump.center + half] {
        let far = edge + lambda * horizon;
        for stripe in region.stripes() {
            predicted_onset = predicted_onset.max(crossing_window(lambda, *stripe, far, horizon)?.t_ex);
        }
    }
    let plateau = traj.at(tau_slow).map_or(f64::NAN, |s| s.l2_total / first.l2_total);
    Ok(ProbeReport { tau_slow, predicted_onset, onset: traj.decay_onset(ONSET_EPS), plateau_ratio: plateau, stride_time })
}
