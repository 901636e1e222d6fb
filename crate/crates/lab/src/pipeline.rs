//! Experiment orchestration and the structured summaries written by the CLI.

use hyperdelay_core::chartimes::{
    geometric_ratio_holds, sup_undamped_measure, tau_bar, tau_star_bounds, three_speed_geometry, ScanSpec,
    ThreeSpeedCase, ThreeSpeedGeometry, TimesError,
};
use hyperdelay_core::model::{sk_check_eigvec, sk_check_kalman, ValidationReport};
use hyperdelay_core::solver::{Grid, Sample, Simulation, SolverError, Trajectory};
use hyperdelay_core::spectral::{gamma_estimate, FullSpaceEvolver, SpectralError, SpectralScan, DEFAULT_SAMPLES, DEFAULT_XI_MAX};
use hyperdelay_core::{HyperbolicSystem, UndampedRegion};
use serde::Serialize;
use thiserror::Error;

use crate::envelope::{
    calibrate, conservation_probe, verify_envelope, EnvelopeError, EnvelopeReport, ProbeReport, ENVELOPE_SLACK,
    ONSET_EPS,
};
use crate::export::{nums, table_csv, Num};
use crate::scenario::{Draft, ExperimentKind, Issue, Scenario};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Times(#[from] TimesError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("{0}")]
    Unsupported(&'static str),
}

/// Samples of a fullspace run when the scenario gives no stride.
pub const DEFAULT_FULLSPACE_SAMPLES: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub passed: bool,
    pub measured: Num,
    pub threshold: Num,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub passed: bool,
    pub kappa0: Num,
    pub checks: Vec<CheckSummary>,
}

impl From<&ValidationReport> for ValidationSummary {
    fn from(r: &ValidationReport) -> Self {
        Self {
            passed: r.passed(),
            kappa0: Num(r.kappa0),
            checks: r
                .checks
                .iter()
                .map(|c| CheckSummary {
                    name: c.name,
                    passed: c.passed,
                    measured: Num(c.measured),
                    threshold: Num(c.threshold),
                    detail: c.detail.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SkSummary {
    pub eigenvector: bool,
    pub kalman: bool,
}

impl SkSummary {
    pub fn passed(&self) -> bool {
        self.eigenvector && self.kalman
    }
}

pub fn sk_summary(system: &HyperbolicSystem) -> Result<SkSummary, PipelineError> {
    let eigs = hyperdelay_core::model::diagonalize(system.flux()).map_err(SpectralError::from)?;
    let b = system.full_damping().map_err(SpectralError::from)?;
    Ok(SkSummary { eigenvector: sk_check_eigvec(&eigs, &b), kalman: sk_check_kalman(system.flux(), &b) })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub gamma: Num,
    pub c_low: Num,
    pub sk_holds: bool,
    pub dissipative: bool,
    pub tail_variation: Num,
    pub tail_stable: bool,
    pub xi_max: Num,
    pub samples: usize,
}

impl SpectrumSummary {
    pub fn new(scan: &SpectralScan, xi_max: f64) -> Self {
        Self {
            gamma: Num(scan.gamma),
            c_low: Num(scan.c_low),
            sk_holds: scan.sk_holds,
            dissipative: scan.dissipative(),
            tail_variation: Num(scan.tail_variation),
            tail_stable: scan.tail_stable(),
            xi_max: Num(xi_max),
            samples: scan.xi_grid.len(),
        }
    }
}

/// Full scan output for the `spectrum` command.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(flatten)]
    pub summary: SpectrumSummary,
    pub xi: Vec<Num>,
    pub abscissa: Vec<Num>,
}

pub fn spectrum_report(system: &HyperbolicSystem, xi_max: f64, samples: usize) -> Result<SpectrumReport, PipelineError> {
    let scan = gamma_estimate(system, xi_max, samples)?;
    Ok(SpectrumReport { summary: SpectrumSummary::new(&scan, xi_max), xi: nums(&scan.xi_grid), abscissa: nums(&scan.abscissas) })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub speeds: Vec<Num>,
    pub half_width: Num,
    pub x2: Num,
    pub t2: Num,
    pub x1: Num,
    pub t1: Num,
    pub t_lambda: Num,
    pub case: &'static str,
    pub tau_star: Num,
    pub tau_bar: Num,
}

impl From<&ThreeSpeedGeometry> for GeometrySummary {
    fn from(g: &ThreeSpeedGeometry) -> Self {
        Self {
            speeds: nums(&g.speeds()),
            half_width: Num(g.half_width),
            x2: Num(g.x2),
            t2: Num(g.t2),
            x1: Num(g.x1),
            t1: Num(g.t1),
            t_lambda: Num(g.t_lambda),
            case: match g.case {
                ThreeSpeedCase::Overlap => "overlap",
                ThreeSpeedCase::Gap => "gap",
                ThreeSpeedCase::Geometric => "geometric",
            },
            tau_star: Num(g.tau_star()),
            tau_bar: Num(g.tau_bar()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauStarSummary {
    pub lemma_lower: Num,
    pub lemma_defined: bool,
    pub exact_three_speed: Option<Num>,
    pub upper: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayRow {
    pub t: Num,
    pub sup: Num,
    pub argmax: Num,
    pub delay: Num,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimesSummary {
    pub tau_bar: Num,
    pub tau_star: TauStarSummary,
    pub geometric_ratio: bool,
    pub three_speed: Option<GeometrySummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sharp_delay: Vec<DelayRow>,
}

/// Geometry of three same-sign speeds crossing a single stripe.
pub fn three_speed(speeds: &[f64], region: &UndampedRegion) -> Option<ThreeSpeedGeometry> {
    if speeds.len() != 3 || region.stripes().len() != 1 {
        return None;
    }
    let same_sign = speeds.iter().all(|&s| s > 0.0) || speeds.iter().all(|&s| s < 0.0);
    if !same_sign {
        return None;
    }
    let mut mags: Vec<f64> = speeds.iter().map(|s| s.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    three_speed_geometry(mags[0], mags[1], mags[2], region.stripes()[0].half_width()).ok()
}

/// Closed-form times plus the brute-force sharp-delay table on `t_grid`.
pub fn times_summary(speeds: &[f64], region: &UndampedRegion, t_grid: &[f64]) -> Result<TimesSummary, PipelineError> {
    let bounds = tau_star_bounds(speeds, region)?;
    let sharp_delay = t_grid
        .iter()
        .map(|&t| {
            let m = sup_undamped_measure(speeds, region, t, ScanSpec::auto(speeds, region, t))?;
            Ok(DelayRow { t: Num(t), sup: Num(m.sup), argmax: Num(m.argmax), delay: Num(t - m.sup) })
        })
        .collect::<Result<Vec<_>, TimesError>>()?;
    Ok(TimesSummary {
        tau_bar: Num(tau_bar(speeds, region)),
        tau_star: TauStarSummary {
            lemma_lower: Num(bounds.lemma_lower),
            lemma_defined: bounds.lemma_defined,
            exact_three_speed: bounds.exact_three_speed.map(Num),
            upper: Num(bounds.upper),
        },
        geometric_ratio: geometric_ratio_holds(speeds),
        three_speed: three_speed(speeds, region).as_ref().map(GeometrySummary::from),
        sharp_delay,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub dx: Num,
    pub dt: Num,
    pub v_unit: Num,
    pub shifts: Vec<i64>,
    pub snap_displacement: Num,
    pub steps: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub t_final: Num,
    pub l2_initial: Num,
    pub l2_final: Num,
    pub onset_eps: Num,
    pub onset: Option<Num>,
}

impl From<&Trajectory> for TrajectorySummary {
    fn from(traj: &Trajectory) -> Self {
        let first = traj.samples.first();
        let last = traj.samples.last();
        Self {
            samples: traj.samples.len(),
            t_final: Num(last.map_or(0.0, |s| s.t)),
            l2_initial: Num(first.map_or(0.0, |s| s.l2_total)),
            l2_final: Num(last.map_or(0.0, |s| s.l2_total)),
            onset_eps: Num(ONSET_EPS),
            onset: traj.decay_onset(ONSET_EPS).map(Num),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSummary {
    pub gamma: Num,
    pub c_high: Num,
    pub c_low: Num,
    pub calibration: &'static str,
    pub tau_bar: Num,
    pub slack: Num,
    pub check_from: Num,
    pub violations: usize,
    pub low_violations: usize,
    pub max_margin: Num,
    pub max_low_margin: Num,
    pub onset: Option<Num>,
}

impl From<&EnvelopeReport> for EnvelopeSummary {
    fn from(r: &EnvelopeReport) -> Self {
        Self {
            gamma: Num(r.calibration.gamma),
            c_high: Num(r.calibration.c_high),
            c_low: Num(r.calibration.c_low),
            calibration: "1.1 x max ratio over a fully damped reference run",
            tau_bar: Num(r.tau_bar),
            slack: Num(r.slack),
            check_from: Num(r.check_from),
            violations: r.violations,
            low_violations: r.low_violations,
            max_margin: Num(r.max_margin),
            max_low_margin: Num(r.max_low_margin),
            onset: r.onset.map(Num),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub tau_slow: Num,
    pub predicted_onset: Num,
    pub onset: Option<Num>,
    pub plateau_ratio: Num,
    pub stride_time: Num,
}

impl From<&ProbeReport> for ProbeSummary {
    fn from(p: &ProbeReport) -> Self {
        Self {
            tau_slow: Num(p.tau_slow),
            predicted_onset: Num(p.predicted_onset),
            onset: p.onset.map(Num),
            plateau_ratio: Num(p.plateau_ratio),
            stride_time: Num(p.stride_time),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub n: usize,
    pub n1: usize,
    pub eigenvalues: Vec<Num>,
    pub negatives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: Option<String>,
    pub kind: &'static str,
    pub system: SystemSummary,
    pub validation: ValidationSummary,
    pub sk: SkSummary,
    pub spectral: SpectrumSummary,
    pub times: Option<TimesSummary>,
    pub grid: Option<GridSummary>,
    pub trajectory: Option<TrajectorySummary>,
    pub envelope: Option<EnvelopeSummary>,
    pub probe: Option<ProbeSummary>,
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub scan: SpectralScan,
    pub trajectory: Trajectory,
    pub reference: Option<Trajectory>,
    pub envelope: Option<EnvelopeReport>,
    pub probe: Option<ProbeReport>,
}

fn base_summary(scenario: &Scenario, scan: &SpectralScan) -> Result<Summary, PipelineError> {
    let times = match scenario.region() {
        Some(region) => Some(times_summary(scenario.speeds(), region, &[])?),
        None => None,
    };
    Ok(Summary {
        scenario: scenario.name.clone(),
        kind: scenario.kind.as_str(),
        system: SystemSummary {
            n: scenario.system.n(),
            n1: scenario.system.n1(),
            eigenvalues: nums(scenario.speeds()),
            negatives: scenario.eigs.negatives(),
        },
        validation: ValidationSummary::from(&scenario.validation),
        sk: sk_summary(&scenario.system)?,
        spectral: SpectrumSummary::new(scan, DEFAULT_XI_MAX),
        times,
        grid: None,
        trajectory: None,
        envelope: None,
        probe: None,
    })
}

fn grid_summary(sim: &Simulation) -> GridSummary {
    let g: &Grid = sim.grid();
    GridSummary {
        dx: Num(g.dx),
        dt: Num(g.dt),
        v_unit: Num(g.v_unit),
        shifts: g.shifts.clone(),
        snap_displacement: Num(g.snap_displacement),
        steps: sim.steps(),
        stride: sim.stride(),
    }
}

struct SolverRun {
    trajectory: Trajectory,
    grid: GridSummary,
    stride_time: f64,
}

fn solve(scenario: &Scenario) -> Result<SolverRun, PipelineError> {
    let mut sim = Simulation::new(&scenario.system, &scenario.run_setup())?;
    let grid = grid_summary(&sim);
    let stride_time = sim.stride() as f64 * sim.grid().dt;
    let trajectory = sim.run()?;
    Ok(SolverRun { trajectory, grid, stride_time })
}

/// Fourier-side trajectory of the fully damped problem on the scenario's
/// domain, treated as periodic.
pub fn fullspace_trajectory(scenario: &Scenario) -> Result<Trajectory, PipelineError> {
    let d = scenario.domain;
    let dx = d.dx();
    let n = scenario.system.n();
    let mut initial = vec![vec![0.0; d.cells]; n];
    for b in &scenario.initial.bumps {
        for (j, v) in initial[b.component].iter_mut().enumerate() {
            *v += b.value(d.x_min + (j as f64 + 0.5) * dx);
        }
    }
    let evolver = FullSpaceEvolver::new(&scenario.system, &initial, dx)?;
    let vmax = scenario.speeds().iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let count = match scenario.stride {
        Some(stride) => (scenario.t_final / (stride as f64 * dx / vmax)).ceil().max(1.0) as usize,
        None => DEFAULT_FULLSPACE_SAMPLES,
    };
    let samples = (0..=count)
        .map(|k| {
            let t = scenario.t_final * k as f64 / count as f64;
            let norms = evolver.norms_at(t)?;
            let field = evolver.field_at(t)?;
            let components: Vec<f64> = field.iter().map(|c| (dx * c.iter().map(|v| v * v).sum::<f64>()).sqrt()).collect();
            Ok(Sample {
                t,
                l2_total: norms.l2,
                l2_high: norms.l2_high,
                l2_low: norms.l2_low,
                linf: field.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())),
                l1: dx * field.iter().flatten().map(|v| v.abs()).sum::<f64>(),
                linf_low: norms.linf_low,
                components,
            })
        })
        .collect::<Result<Vec<_>, SpectralError>>()?;
    Ok(Trajectory { samples })
}

fn region_tau_bar(scenario: &Scenario) -> f64 {
    scenario.region().map_or(0.0, |r| tau_bar(scenario.speeds(), r))
}

/// Calibrate on a fully damped run, rerun with the scenario's region and
/// check the delayed envelope.
pub fn verify(scenario: &Scenario) -> Result<Outcome, PipelineError> {
    if !scenario.kind.needs_grid() {
        return Err(PipelineError::Unsupported("envelope verification runs the exact-shift solver; use a grid scenario"));
    }
    let scan = gamma_estimate(&scenario.system, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
    let reference = solve(&scenario.fully_damped())?;
    let calibration = calibrate(&reference.trajectory, scan.gamma)?;
    let run = solve(scenario)?;
    let report = verify_envelope(&run.trajectory, calibration, region_tau_bar(scenario), ENVELOPE_SLACK, run.stride_time)?;
    let mut summary = base_summary(scenario, &scan)?;
    summary.grid = Some(run.grid);
    summary.trajectory = Some(TrajectorySummary::from(&run.trajectory));
    summary.envelope = Some(EnvelopeSummary::from(&report));
    Ok(Outcome {
        summary,
        scan,
        trajectory: run.trajectory,
        reference: Some(reference.trajectory),
        envelope: Some(report),
        probe: None,
    })
}

/// Runs the experiment named by the scenario's `kind`.
pub fn run_experiment(scenario: &Scenario) -> Result<Outcome, PipelineError> {
    match scenario.kind {
        ExperimentKind::VerifyEnvelope => verify(scenario),
        ExperimentKind::Fullspace => {
            let scan = gamma_estimate(&scenario.system, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
            let trajectory = fullspace_trajectory(scenario)?;
            let mut summary = base_summary(scenario, &scan)?;
            summary.trajectory = Some(TrajectorySummary::from(&trajectory));
            Ok(Outcome { summary, scan, trajectory, reference: None, envelope: None, probe: None })
        }
        ExperimentKind::Simulate | ExperimentKind::ConservationProbe => {
            let scan = gamma_estimate(&scenario.system, DEFAULT_XI_MAX, DEFAULT_SAMPLES)?;
            let run = solve(scenario)?;
            let mut summary = base_summary(scenario, &scan)?;
            let probe = match (scenario.kind, scenario.region(), scenario.initial.bumps.first()) {
                (ExperimentKind::ConservationProbe, Some(region), Some(bump)) => {
                    Some(conservation_probe(&run.trajectory, &scenario.eigs, region, bump, run.stride_time)?)
                }
                _ => None,
            };
            summary.grid = Some(run.grid);
            summary.trajectory = Some(TrajectorySummary::from(&run.trajectory));
            summary.probe = probe.as_ref().map(ProbeSummary::from);
            Ok(Outcome { summary, scan, trajectory: run.trajectory, reference: None, envelope: None, probe })
        }
    }
}

/// Output of the `check` command.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub validation: ValidationSummary,
    /// Absent when the flux cannot be diagonalized.
    pub sk: Option<SkSummary>,
    pub issues: Vec<Issue>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.validation.passed && self.sk.is_some_and(|sk| sk.passed()) && self.issues.is_empty()
    }
}

pub fn check(draft: &Draft) -> CheckReport {
    CheckReport {
        validation: ValidationSummary::from(&draft.validation),
        sk: if draft.validation.passed() { sk_summary(&draft.system).ok() } else { None },
        issues: draft.issues.clone(),
    }
}

/// `t, margin_high, margin_low` per sample; the low margin is `nan` up to `τ̄`.
pub fn envelope_csv(report: &EnvelopeReport) -> String {
    let skipped = report.margins.len() - report.low_margins.len();
    let rows = report.margins.iter().enumerate().map(|(k, &(t, high))| {
        let low = k.checked_sub(skipped).map_or(f64::NAN, |j| report.low_margins[j].1);
        vec![t, high, low]
    });
    table_csv(&["t", "margin_high", "margin_low"], rows)
}

/// Evenly spaced times `start, start + step, …` up to `stop` inclusive.
pub fn time_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, PipelineError> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(PipelineError::Unsupported("time grid needs finite start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::Calibration;

    #[test]
    fn time_grid_includes_the_endpoint() {
        let g = time_grid(4.0, 6.0, 0.5).unwrap();
        assert_eq!(g, vec![4.0, 4.5, 5.0, 5.5, 6.0]);
        assert_eq!(time_grid(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(time_grid(1.0, 0.0, 0.1).is_err());
        assert!(time_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn three_speed_needs_same_signs_and_one_stripe() {
        let single = UndampedRegion::single(1.0);
        let g = three_speed(&[1.0, 2.0, 3.0], &single).unwrap();
        assert_eq!((g.s1, g.s2, g.s3), (3.0, 2.0, 1.0));
        assert_eq!(three_speed(&[-1.0, -2.0, -3.0], &single).unwrap().t1, g.t1);
        assert!(three_speed(&[-1.0, 2.0, 3.0], &single).is_none());
        assert!(three_speed(&[1.0, 2.0], &single).is_none());
        let two = UndampedRegion::new(vec![hyperdelay_core::Interval::new(0.0, 1.0), hyperdelay_core::Interval::new(2.0, 3.0)]).unwrap();
        assert!(three_speed(&[1.0, 2.0, 3.0], &two).is_none());
    }

    #[test]
    fn envelope_csv_pads_low_margins() {
        let report = EnvelopeReport {
            calibration: Calibration { gamma: 0.5, c_high: 1.0, c_low: 1.0 },
            tau_bar: 1.0,
            slack: 0.05,
            check_from: 1.5,
            margins: vec![(0.0, -1.0), (1.0, -0.5), (2.0, -0.25)],
            low_margins: vec![(2.0, -0.125)],
            violations: 0,
            low_violations: 0,
            max_margin: -0.25,
            max_low_margin: -0.125,
            onset: None,
        };
        let csv = envelope_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",nan"));
        assert!(lines[3].ends_with(",-0.12500000000000000"));
    }
}
