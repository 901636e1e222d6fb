//! Fourier-side reference for the fully damped problem (`ω = ℝ`).
//!
//! In one dimension the symbol is `E(ξ) = −iξA − B̃` and the Fourier modes
//! evolve independently by `exp(E(ξ) t)`. The spectral abscissa of `E(ξ)`
//! over `|ξ| ≥ 1` gives the high-frequency rate `γ`, and its behaviour
//! `≈ −c ξ²` near the origin gives the heat-like low-frequency rate.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::fft;
use crate::linalg::{complex_eigenvalues, CMat, LinalgError, Mat};
use crate::model::{diagonalize, sk_check_kalman, source_matrix, HyperbolicSystem, ModelError};

/// Largest `‖Mt‖₁` accepted by [`matrix_exp`].
pub const MATRIX_EXP_NORM_LIMIT: f64 = 1e6;
/// `|ξ|` separating the high- and low-frequency parts.
pub const FREQUENCY_CUTOFF: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix exponential argument too large (‖Mt‖₁ = {0:e})")]
    ExpOverflow(f64),
    #[error("initial spectrum does not decay before Nyquist: relative tail amplitude {0:e}")]
    Aliasing(f64),
    #[error("invalid field: {0}")]
    Field(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    /// `E = −iξA − B̃` on `U`.
    Original,
    /// `E = −iξD − PᵀB̃P` on `V = PᵀU`.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub xi: f64,
    pub matrix: CMat,
}

/// Assembles `E(ξ) = −iξ·flux − damping` from real matrices.
pub fn symbol_from_parts(flux: &Mat, damping: &Mat, xi: f64) -> SymbolMatrix {
    let n = flux.rows();
    let mut e = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = Complex64::new(-damping[(i, j)], -xi * flux[(i, j)]);
        }
    }
    SymbolMatrix { xi, matrix: e }
}

pub fn symbol(sys: &HyperbolicSystem, coords: Coordinates, xi: f64) -> Result<SymbolMatrix, SpectralError> {
    let b = sys.full_damping()?;
    Ok(match coords {
        Coordinates::Original => symbol_from_parts(sys.flux(), b.matrix(), xi),
        Coordinates::Diagonal => {
            let eigs = diagonalize(sys.flux())?;
            symbol_from_parts(&Mat::diag(eigs.lambdas()), &source_matrix(&eigs, &b), xi)
        }
    })
}

/// `exp(M t)` by scaling and squaring of a truncated Taylor series.
pub fn matrix_exp(m: &CMat, t: f64) -> Result<CMat, SpectralError> {
    let n = m.rows();
    let a = m.scale(Complex64::new(t, 0.0));
    let norm = a.norm1();
    if !norm.is_finite() || norm > MATRIX_EXP_NORM_LIMIT {
        return Err(SpectralError::ExpOverflow(norm));
    }
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.5 {
        scaled_norm *= 0.5;
        squarings += 1;
    }
    let a = a.scale(Complex64::new(libm::ldexp(1.0, -(squarings as i32)), 0.0));
    // ‖a‖₁ ≤ 1/2; at most 20 Taylor terms.
    let mut sum = CMat::identity(n);
    let mut term = CMat::identity(n);
    for k in 1..=20 {
        term = term.matmul(&a).scale(Complex64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.max_abs() <= f64::EPSILON * 1e-3 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    if !sum.is_finite() {
        return Err(SpectralError::ExpOverflow(norm));
    }
    Ok(sum)
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &CMat) -> Result<f64, SpectralError> {
    let eig = complex_eigenvalues(m)?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScan {
    pub xi_grid: Vec<f64>,
    pub abscissas: Vec<f64>,
    /// `−max abscissa` over `|ξ| ≥ 1`.
    pub gamma: f64,
    /// Least-squares `c` in `abscissa ≈ −c ξ²` over `0 < ξ ≤ 0.1`.
    pub c_low: f64,
    pub sk_holds: bool,
    /// Spread of the abscissa over the last decade of the grid.
    pub tail_variation: f64,
}

impl SpectralScan {
    pub fn dissipative(&self) -> bool {
        self.gamma > 0.0
    }

    pub fn tail_stable(&self) -> bool {
        self.tail_variation < 1e-6
    }
}

pub const DEFAULT_XI_MAX: f64 = 100.0;
pub const DEFAULT_SAMPLES: usize = 400;

/// Frequencies `[0, 1)` on a linear grid followed by `[1, xi_max]` on a
/// logarithmic one, half the samples each.
pub fn scan_grid(xi_max: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(4);
    let n_lin = samples / 2;
    let n_log = samples - n_lin;
    let mut grid: Vec<f64> = (0..n_lin).map(|k| k as f64 / n_lin as f64).collect();
    let log_max = libm::log(xi_max.max(1.0));
    for k in 0..n_log {
        let frac = if n_log == 1 { 0.0 } else { k as f64 / (n_log - 1) as f64 };
        grid.push(libm::exp(log_max * frac));
    }
    grid
}

pub fn gamma_estimate(sys: &HyperbolicSystem, xi_max: f64, samples: usize) -> Result<SpectralScan, SpectralError> {
    let b = sys.full_damping()?;
    let grid = scan_grid(xi_max, samples);
    let abscissas = grid
        .iter()
        .map(|&xi| spectral_abscissa(&symbol_from_parts(sys.flux(), b.matrix(), xi).matrix))
        .collect::<Result<Vec<_>, _>>()?;

    let high_max = grid
        .iter()
        .zip(&abscissas)
        .filter(|(xi, _)| **xi >= FREQUENCY_CUTOFF)
        .map(|(_, a)| *a)
        .fold(f64::NEG_INFINITY, f64::max);

    let (num, den) = grid
        .iter()
        .zip(&abscissas)
        .filter(|(xi, _)| **xi > 0.0 && **xi <= 0.1)
        .fold((0.0, 0.0), |(num, den), (xi, a)| (num - a * xi * xi, den + xi * xi * xi * xi));
    let c_low = if den > 0.0 { num / den } else { 0.0 };

    let tail_start = xi_max / 10.0;
    let (tmin, tmax) = grid
        .iter()
        .zip(&abscissas)
        .filter(|(xi, _)| **xi >= tail_start)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, a)| (lo.min(*a), hi.max(*a)));

    Ok(SpectralScan {
        xi_grid: grid,
        abscissas,
        gamma: -high_max,
        c_low,
        sk_holds: sk_check_kalman(sys.flux(), &b),
        tail_variation: if tmax >= tmin { tmax - tmin } else { 0.0 },
    })
}

/// Norms of the evolved field at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorms {
    pub t: f64,
    pub l2: f64,
    pub l2_high: f64,
    pub l2_low: f64,
    pub linf_low: f64,
}

/// Exact per-mode evolution of periodic data for the fully damped system,
/// in diagonalized coordinates.
#[derive(Debug, Clone)]
pub struct FullSpaceEvolver {
    speeds: Mat,
    coupling: Mat,
    dx: f64,
    cells: usize,
    /// `spectrum[k][i]`: component `i` of mode `k`.
    spectrum: Vec<Vec<Complex64>>,
}

/// Relative spectral amplitude allowed in the top tenth of the frequency band.
pub const ALIASING_TOL: f64 = 1e-8;

impl FullSpaceEvolver {
    /// `initial[i]` holds component `v_i` sampled at `m` points spaced `dx`.
    pub fn new(sys: &HyperbolicSystem, initial: &[Vec<f64>], dx: f64) -> Result<Self, SpectralError> {
        let n = sys.n();
        if initial.len() != n {
            return Err(SpectralError::Field("one profile per component is required"));
        }
        let cells = initial[0].len();
        if cells < 2 || initial.iter().any(|c| c.len() != cells) {
            return Err(SpectralError::Field("profiles must share a grid of at least two points"));
        }
        if !(dx > 0.0) {
            return Err(SpectralError::Field("dx must be positive"));
        }
        let eigs = diagonalize(sys.flux())?;
        let coupling = source_matrix(&eigs, &sys.full_damping()?);

        let mut spectrum = vec![vec![Complex64::new(0.0, 0.0); n]; cells];
        for (i, comp) in initial.iter().enumerate() {
            let mut buf: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft::forward(&mut buf);
            for (k, z) in buf.into_iter().enumerate() {
                spectrum[k][i] = z;
            }
        }

        let amp = |k: usize| -> f64 { spectrum[k].iter().map(|z| z.norm()).fold(0.0, f64::max) };
        let peak = (0..cells).map(amp).fold(0.0, f64::max);
        let nyquist = cells / 2;
        let band_start = nyquist - nyquist / 10;
        let tail = (0..cells)
            .filter(|&k| {
                let signed = if k <= nyquist { k } else { cells - k };
                signed >= band_start && signed > 0
            })
            .map(amp)
            .fold(0.0, f64::max);
        if peak > 0.0 && tail > ALIASING_TOL * peak {
            return Err(SpectralError::Aliasing(tail / peak));
        }

        Ok(Self { speeds: Mat::diag(eigs.lambdas()), coupling, dx, cells, spectrum })
    }

    pub fn length(&self) -> f64 {
        self.dx * self.cells as f64
    }

    fn evolved_spectrum(&self, t: f64) -> Result<Vec<Vec<Complex64>>, SpectralError> {
        let length = self.length();
        (0..self.cells)
            .map(|k| {
                let xi = fft::angular_frequency(k, self.cells, length);
                let e = symbol_from_parts(&self.speeds, &self.coupling, xi).matrix;
                Ok(matrix_exp(&e, t)?.matvec(&self.spectrum[k]))
            })
            .collect()
    }

    fn synthesize(&self, spec: &[Vec<Complex64>], keep: impl Fn(f64) -> bool) -> Vec<Vec<f64>> {
        let n = spec.first().map_or(0, Vec::len);
        let length = self.length();
        (0..n)
            .map(|i| {
                let mut buf: Vec<Complex64> = (0..self.cells)
                    .map(|k| {
                        if keep(fft::angular_frequency(k, self.cells, length)) {
                            spec[k][i]
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                fft::inverse(&mut buf);
                buf.iter().map(|z| z.re / self.cells as f64).collect()
            })
            .collect()
    }

    /// Field at time `t` on the original grid.
    pub fn field_at(&self, t: f64) -> Result<Vec<Vec<f64>>, SpectralError> {
        let spec = self.evolved_spectrum(t)?;
        Ok(self.synthesize(&spec, |_| true))
    }

    pub fn norms_at(&self, t: f64) -> Result<SpectralNorms, SpectralError> {
        let spec = self.evolved_spectrum(t)?;
        let length = self.length();
        let weight = self.dx / self.cells as f64;
        let (mut high, mut low) = (0.0, 0.0);
        for (k, mode) in spec.iter().enumerate() {
            let e: f64 = mode.iter().map(|z| z.norm_sqr()).sum();
            if fft::angular_frequency(k, self.cells, length).abs() > FREQUENCY_CUTOFF {
                high += e;
            } else {
                low += e;
            }
        }
        let low_field = self.synthesize(&spec, |xi| xi.abs() <= FREQUENCY_CUTOFF);
        let linf_low = low_field.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(SpectralNorms {
            t,
            l2: libm::sqrt(weight * (high + low)),
            l2_high: libm::sqrt(weight * high),
            l2_low: libm::sqrt(weight * low),
            linf_low,
        })
    }
}

/// Norms of the fully damped evolution at each requested time.
pub fn fullspace_evolve(
    sys: &HyperbolicSystem,
    initial: &[Vec<f64>],
    dx: f64,
    times: &[f64],
) -> Result<Vec<SpectralNorms>, SpectralError> {
    let evolver = FullSpaceEvolver::new(sys, initial, dx)?;
    times.iter().map(|&t| evolver.norms_at(t)).collect()
}
