//! Exact-shift transport with Strang-split localized damping.
//!
//! Each diagonalized component moves an integer number of cells per step,
//! so advection is exact and carries no numerical diffusion. Damping is the
//! exact matrix exponential `exp(−M dt/2)` applied cell-wise where the mask
//! is on, before and after the shift. All decay a run measures therefore
//! comes from the damping term.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::chartimes::UndampedRegion;
use crate::fft;
use crate::linalg::Mat;
use crate::model::{diagonalize, source_matrix, HyperbolicSystem, ModelError};
use crate::spectral::{matrix_exp, SpectralError, FREQUENCY_CUTOFF};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("speed ratios are not rational within 1e-9 (|λ| = {0}); exact shifting needs rational speed ratios")]
    IrrationalSpeeds(f64),
    #[error("domain of length {length} is too small for t_final = {t_final} at speed {speed}")]
    DomainTooSmall { length: f64, t_final: f64, speed: f64 },
    #[error("invalid grid: {0}")]
    Grid(&'static str),
    #[error("invalid initial data: {0}")]
    Initial(&'static str),
    #[error("signal reached the boundary at t = {t} (component {component}, |v| = {value:e})")]
    Boundary { t: f64, component: usize, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Largest denominator tried when recognising a speed ratio as rational.
const MAX_DENOMINATOR: u64 = 1000;
const RATIONAL_TOL: f64 = 1e-9;

/// Uniform domain `[x_min, x_max]` split into `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
}

impl Domain {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub dx: f64,
    pub dt: f64,
    /// Speed that moves one cell per step.
    pub v_unit: f64,
    /// Signed cell displacement per step for each component.
    pub shifts: Vec<i64>,
    /// `true` where damping is on.
    pub damp_mask: Vec<bool>,
    /// Largest distance a stripe edge moved when snapped to a cell edge.
    pub snap_displacement: f64,
}

impl Grid {
    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx
    }

    pub fn length(&self) -> f64 {
        self.dx * self.cells as f64
    }
}

/// Best rational approximation `p/q` with `q ≤ MAX_DENOMINATOR`, if it is
/// within the relative tolerance.
fn as_rational(x: f64) -> Option<(u64, u64)> {
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut rest = x;
    for _ in 0..64 {
        let a = libm::floor(rest);
        if a > 1e12 {
            break;
        }
        let a_int = a as u64;
        let h2 = a_int.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a_int.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= RATIONAL_TOL * x {
            return Some((h1, k1));
        }
        let frac = rest - a;
        if frac <= 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    if k1 > 0 && (h1 as f64 / k1 as f64 - x).abs() <= RATIONAL_TOL * x {
        Some((h1, k1))
    } else {
        None
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Common unit `v` with every `|λ_i| = k_i v` for integers `k_i`, and those
/// integers with their signs.
pub fn speed_unit(speeds: &[f64]) -> Result<(f64, Vec<i64>), SolverError> {
    let base = speeds.iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
    if speeds.is_empty() || !(base > 0.0) || !base.is_finite() {
        return Err(SolverError::Grid("speeds must be finite and nonzero"));
    }
    let mut fracs = Vec::with_capacity(speeds.len());
    for &s in speeds {
        let r = as_rational(s.abs() / base).ok_or(SolverError::IrrationalSpeeds(s.abs()))?;
        fracs.push(r);
    }
    let lcm_den = fracs.iter().fold(1u64, |l, &(_, q)| l / gcd(l, q) * q);
    let mut ints: Vec<u64> = fracs.iter().map(|&(p, q)| p * (lcm_den / q)).collect();
    let g = ints.iter().fold(0u64, |g, &k| gcd(g, k));
    for k in ints.iter_mut() {
        *k /= g;
    }
    let v_unit = base * g as f64 / lcm_den as f64;
    let shifts = ints.iter().zip(speeds).map(|(&k, &s)| if s < 0.0 { -(k as i64) } else { k as i64 }).collect();
    Ok((v_unit, shifts))
}

/// Grid with `dt = dx / v_unit`; every speed shifts by whole cells.
pub fn build_grid(
    domain: Domain,
    speeds: &[f64],
    region: Option<&UndampedRegion>,
    t_final: f64,
) -> Result<Grid, SolverError> {
    if domain.cells < 4 || !(domain.x_max > domain.x_min) {
        return Err(SolverError::Grid("domain needs x_max > x_min and at least 4 cells"));
    }
    if !(t_final >= 0.0) {
        return Err(SolverError::Grid("t_final must be non-negative"));
    }
    let dx = domain.dx();
    let (v_unit, shifts) = speed_unit(speeds)?;
    let vmax = speeds.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let length = domain.x_max - domain.x_min;
    if vmax * t_final >= length {
        return Err(SolverError::DomainTooSmall { length, t_final, speed: vmax });
    }

    let snap = |x: f64| domain.x_min + libm::round((x - domain.x_min) / dx) * dx;
    let mut damp_mask = vec![true; domain.cells];
    let mut snap_displacement = 0.0_f64;
    if let Some(region) = region {
        for stripe in region.stripes() {
            let (lo, hi) = (snap(stripe.lo), snap(stripe.hi));
            snap_displacement = snap_displacement.max((lo - stripe.lo).abs()).max((hi - stripe.hi).abs());
            for (j, m) in damp_mask.iter_mut().enumerate() {
                let x = domain.x_min + (j as f64 + 0.5) * dx;
                if lo <= x && x <= hi {
                    *m = false;
                }
            }
        }
    }

    Ok(Grid {
        x_min: domain.x_min,
        x_max: domain.x_max,
        cells: domain.cells,
        dx,
        dt: dx / v_unit,
        v_unit,
        shifts,
        damp_mask,
        snap_displacement,
    })
}

/// Diagonalized components `v_i` at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpShape {
    /// `a·exp(−(x−c)²/(2w²))`: `width` is the standard deviation.
    Gaussian,
    /// `a` on `|x − c| ≤ w/2`.
    Box,
    /// `a·(1 + cos(2π(x−c)/w))/2` on `|x − c| ≤ w/2`.
    CosineBump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    /// Zero-based component index in eigenvalue order.
    pub component: usize,
    pub shape: BumpShape,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// Gaussians are treated as supported within this many standard deviations.
const GAUSSIAN_SUPPORT: f64 = 8.0;

impl Bump {
    pub fn value(&self, x: f64) -> f64 {
        let d = x - self.center;
        match self.shape {
            BumpShape::Gaussian => self.amplitude * libm::exp(-d * d / (2.0 * self.width * self.width)),
            BumpShape::Box => {
                if d.abs() <= 0.5 * self.width {
                    self.amplitude
                } else {
                    0.0
                }
            }
            BumpShape::CosineBump => {
                if d.abs() <= 0.5 * self.width {
                    self.amplitude * 0.5 * (1.0 + libm::cos(2.0 * PI * d / self.width))
                } else {
                    0.0
                }
            }
        }
    }

    pub fn support_half_width(&self) -> f64 {
        match self.shape {
            BumpShape::Gaussian => GAUSSIAN_SUPPORT * self.width,
            BumpShape::Box | BumpShape::CosineBump => 0.5 * self.width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialDataSpec {
    pub bumps: Vec<Bump>,
}

impl InitialDataSpec {
    pub fn new(bumps: Vec<Bump>) -> Self {
        Self { bumps }
    }

    pub fn validate(&self, n: usize) -> Result<(), SolverError> {
        for b in &self.bumps {
            if b.component >= n {
                return Err(SolverError::Initial("component index out of range"));
            }
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(SolverError::Initial("bump widths must be positive"));
            }
            if !b.center.is_finite() || !b.amplitude.is_finite() {
                return Err(SolverError::Initial("bump center and amplitude must be finite"));
            }
        }
        Ok(())
    }

    /// Every bump stays clear of the boundary while moving at `vmax` for `t_final`.
    pub fn check_margin(&self, grid: &Grid, vmax: f64, t_final: f64) -> Result<(), SolverError> {
        let travel = vmax * t_final + 2.0 * grid.dx;
        for b in &self.bumps {
            let h = b.support_half_width();
            if b.center - h - travel < grid.x_min || b.center + h + travel > grid.x_max {
                return Err(SolverError::Initial("bump support too close to the boundary for t_final"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, grid: &Grid, n: usize) -> State {
        let mut values = vec![vec![0.0; grid.cells]; n];
        for b in &self.bumps {
            for (j, v) in values[b.component].iter_mut().enumerate() {
                *v += b.value(grid.center(j));
            }
        }
        State { t: 0.0, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyNorms {
    pub l2: f64,
    pub per_component_l2: Vec<f64>,
    pub l1: f64,
    pub linf: f64,
}

/// Discrete norms; sums run in fixed index order.
pub fn energy_norms(state: &State, grid: &Grid) -> EnergyNorms {
    let per_component_sq: Vec<f64> = state.values.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).collect();
    let l1: f64 = state.values.iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).sum();
    let linf = state.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    EnergyNorms {
        l2: libm::sqrt(grid.dx * per_component_sq.iter().sum::<f64>()),
        per_component_l2: per_component_sq.iter().map(|s| libm::sqrt(grid.dx * s)).collect(),
        l1: grid.dx * l1,
        linf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqSplit {
    pub high: f64,
    pub low: f64,
    /// `max |v^ℓ|` of the low-pass field.
    pub linf_low: f64,
}

/// Splits the discrete L2 energy at `|ξ| = 1`, with `ξ_k = 2πk/(m·dx)`.
pub fn freq_split(state: &State, grid: &Grid) -> FreqSplit {
    let m = grid.cells;
    let length = grid.length();
    let weight = grid.dx / m as f64;
    let (mut high, mut low) = (0.0, 0.0);
    let mut linf_low = 0.0_f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for comp in &state.values {
        for (z, &v) in buf.iter_mut().zip(comp) {
            *z = Complex64::new(v, 0.0);
        }
        fft::forward(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            if fft::angular_frequency(k, m, length).abs() > FREQUENCY_CUTOFF {
                high += z.norm_sqr();
                *z = Complex64::new(0.0, 0.0);
            } else {
                low += z.norm_sqr();
            }
        }
        fft::inverse(&mut buf);
        linf_low = buf.iter().fold(linf_low, |acc, z| acc.max((z.re / m as f64).abs()));
    }
    FreqSplit { high: libm::sqrt(weight * high), low: libm::sqrt(weight * low), linf_low }
}

/// Precomputed half-step damping propagator plus the grid it acts on.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    half_damping: Mat,
    /// Values above this in the two outermost cells abort the run.
    boundary_tol: f64,
}

impl Stepper {
    /// `coupling` is the source matrix `M = PᵀB̃P`.
    pub fn new(grid: Grid, coupling: &Mat) -> Result<Self, SolverError> {
        let n = coupling.rows();
        if grid.shifts.len() != n {
            return Err(SolverError::Grid("one shift per component is required"));
        }
        let half_damping = matrix_exp(&coupling.to_complex(), -0.5 * grid.dt)?.real_part();
        Ok(Self { grid, half_damping, boundary_tol: 0.0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn set_boundary_tolerance(&mut self, tol: f64) {
        self.boundary_tol = tol;
    }

    fn damp(&self, state: &mut State) {
        let n = state.values.len();
        if self.half_damping == Mat::identity(n) {
            return;
        }
        let mut local = vec![0.0; n];
        for (j, &on) in self.grid.damp_mask.iter().enumerate() {
            if !on {
                continue;
            }
            let mut any = false;
            for (i, l) in local.iter_mut().enumerate() {
                *l = state.values[i][j];
                any |= *l != 0.0;
            }
            if !any {
                continue;
            }
            for i in 0..n {
                state.values[i][j] = self.half_damping.row(i).iter().zip(&local).map(|(a, b)| a * b).sum();
            }
        }
    }

    fn advect(&self, state: &mut State) {
        let m = self.grid.cells;
        for (comp, &shift) in state.values.iter_mut().zip(&self.grid.shifts) {
            let s = shift.unsigned_abs() as usize;
            if s >= m {
                comp.iter_mut().for_each(|v| *v = 0.0);
            } else if shift > 0 {
                comp.copy_within(0..m - s, s);
                comp[..s].iter_mut().for_each(|v| *v = 0.0);
            } else if shift < 0 {
                comp.copy_within(s..m, 0);
                comp[m - s..].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn check_boundary(&self, state: &State) -> Result<(), SolverError> {
        let m = self.grid.cells;
        for (i, comp) in state.values.iter().enumerate() {
            for &j in &[0, 1, m - 2, m - 1] {
                if comp[j].abs() > self.boundary_tol {
                    return Err(SolverError::Boundary { t: state.t, component: i, value: comp[j].abs() });
                }
            }
        }
        Ok(())
    }

    /// One Strang step: half damping, exact shift, half damping.
    pub fn step(&self, state: &mut State) -> Result<(), SolverError> {
        self.damp(state);
        self.advect(state);
        self.damp(state);
        state.t += self.grid.dt;
        self.check_boundary(state)
    }
}

/// One trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub l2_total: f64,
    pub l2_high: f64,
    pub l2_low: f64,
    pub linf: f64,
    pub l1: f64,
    pub linf_low: f64,
    pub components: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn initial(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// First sampled time with `L2 < (1 − eps)·L2(0)`.
    pub fn decay_onset(&self, eps: f64) -> Option<f64> {
        let l0 = self.initial()?.l2_total;
        self.samples.iter().find(|s| s.l2_total < (1.0 - eps) * l0).map(|s| s.t)
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

pub fn sample_state(state: &State, grid: &Grid) -> Sample {
    let norms = energy_norms(state, grid);
    let split = freq_split(state, grid);
    Sample {
        t: state.t,
        l2_total: norms.l2,
        l2_high: split.high,
        l2_low: split.low,
        linf: norms.linf,
        l1: norms.l1,
        linf_low: split.linf_low,
        components: norms.per_component_l2,
    }
}

/// Everything a run needs besides the system itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSetup {
    pub domain: Domain,
    pub initial: InitialDataSpec,
    pub t_final: f64,
    /// Steps between samples; `None` aims for about 2000 samples.
    pub stride: Option<usize>,
}

pub const DEFAULT_SAMPLE_COUNT: usize = 2000;

/// A prepared run: grid, propagator and initial state.
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    state: State,
    steps: usize,
    stride: usize,
}

impl Simulation {
    /// The damping region is taken from the system (`None` damps everywhere).
    pub fn new(sys: &HyperbolicSystem, setup: &RunSetup) -> Result<Self, SolverError> {
        let eigs = diagonalize(sys.flux())?;
        let coupling = source_matrix(&eigs, &sys.full_damping()?);
        let grid = build_grid(setup.domain, eigs.lambdas(), sys.region(), setup.t_final)?;
        setup.initial.validate(sys.n())?;
        let vmax = eigs.lambdas().iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        setup.initial.check_margin(&grid, vmax, setup.t_final)?;

        let state = setup.initial.sample(&grid, sys.n());
        let linf0 = state.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let steps = libm::ceil(setup.t_final / grid.dt - 1e-9).max(0.0) as usize;
        let stride = setup.stride.unwrap_or_else(|| (steps / DEFAULT_SAMPLE_COUNT).max(1)).max(1);
        let mut stepper = Stepper::new(grid, &coupling)?;
        stepper.set_boundary_tolerance(1e-12 * linf0.max(f64::MIN_POSITIVE));
        Ok(Self { stepper, state, steps, stride })
    }

    pub fn grid(&self) -> &Grid {
        self.stepper.grid()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Runs to `t_final`, sampling at step 0 and every `stride` steps.
    pub fn run(&mut self) -> Result<Trajectory, SolverError> {
        let mut samples = Vec::with_capacity(self.steps / self.stride + 1);
        samples.push(sample_state(&self.state, self.stepper.grid()));
        for k in 1..=self.steps {
            self.stepper.step(&mut self.state)?;
            if k % self.stride == 0 {
                samples.push(sample_state(&self.state, self.stepper.grid()));
            }
        }
        Ok(Trajectory { samples })
    }
}

/// Convenience wrapper: prepare and run, returning the trajectory and final state.
pub fn run(sys: &HyperbolicSystem, setup: &RunSetup) -> Result<(Trajectory, State), SolverError> {
    let mut sim = Simulation::new(sys, setup)?;
    let traj = sim.run()?;
    Ok((traj, sim.state))
}
