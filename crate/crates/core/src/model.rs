//! Problem instances: flux matrix, damping block and undamped region.
//!
//! The sign convention is dissipative throughout:
//!
//! ```text
//! ∂t U + A ∂x U = −1_ω(x) · B̃ U,      B̃ = diag(0_{n1×n1}, Dd)
//! ```
//!
//! where `ω` is the complement of the [`UndampedRegion`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::chartimes::UndampedRegion;
use crate::linalg::{rank, symmetric_eigen, LinalgError, Mat};

/// Relative threshold used to decide that an eigenvector lies in `Ker B̃`.
pub const KERNEL_TOL: f64 = 1e-10;
/// Relative pivot threshold of the Kalman rank test.
pub const KALMAN_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in `{field}`: {detail}")]
    Dimension { field: &'static str, detail: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn dim_err(field: &'static str, detail: fmt::Arguments<'_>) -> ModelError {
    ModelError::Dimension { field, detail: alloc::format!("{detail}") }
}

/// A 1D linear hyperbolic system with damping localized outside a bounded
/// undamped region.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicSystem {
    n1: usize,
    flux: Mat,
    damping_block: Mat,
    /// `None` means damping acts everywhere (`ω = ℝ`).
    region: Option<UndampedRegion>,
}

impl HyperbolicSystem {
    /// Checks only dimensional consistency; structural properties are the
    /// job of [`validate_system`].
    pub fn new(
        n1: usize,
        flux: Mat,
        damping_block: Mat,
        region: Option<UndampedRegion>,
    ) -> Result<Self, ModelError> {
        let n = flux.rows();
        if n == 0 {
            return Err(dim_err("A", format_args!("flux matrix is empty")));
        }
        if !flux.is_square() {
            return Err(dim_err("A", format_args!("expected {n}x{n}, got {}x{}", flux.rows(), flux.cols())));
        }
        if n1 > n {
            return Err(dim_err("n1", format_args!("n1 = {n1} exceeds n = {n}")));
        }
        let n2 = n - n1;
        if damping_block.rows() != n2 || damping_block.cols() != n2 {
            return Err(dim_err(
                "Dd",
                format_args!("expected {n2}x{n2} (n - n1), got {}x{}", damping_block.rows(), damping_block.cols()),
            ));
        }
        Ok(Self { n1, flux, damping_block, region })
    }

    pub fn n(&self) -> usize {
        self.flux.rows()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n() - self.n1
    }

    pub fn flux(&self) -> &Mat {
        &self.flux
    }

    pub fn damping_block(&self) -> &Mat {
        &self.damping_block
    }

    pub fn region(&self) -> Option<&UndampedRegion> {
        self.region.as_ref()
    }

    pub fn full_damping(&self) -> Result<FullDampingMatrix, ModelError> {
        FullDampingMatrix::new(self.n(), self.n1, &self.damping_block)
    }

    pub fn with_region(&self, region: Option<UndampedRegion>) -> Self {
        Self { region, ..self.clone() }
    }
}

/// Ordered eigen-decomposition of the flux matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    lambdas: Vec<f64>,
    basis: Mat,
    negatives: usize,
}

impl EigenStructure {
    /// Strictly ascending eigenvalues.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Orthogonal matrix `P` with eigenvectors as columns.
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    /// Number of negative eigenvalues (`p`).
    pub fn negatives(&self) -> usize {
        self.negatives
    }
}

/// `B̃ = diag(0, Dd)` together with its coercivity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDampingMatrix {
    btilde: Mat,
    kappa0: f64,
}

impl FullDampingMatrix {
    /// Embeds `Dd` as the trailing block of an `n×n` zero matrix.
    ///
    /// `kappa0` is the smallest eigenvalue of the symmetric part of `Dd`
    /// (zero when there is no damped block). Positivity is not enforced here.
    pub fn new(n: usize, n1: usize, dd: &Mat) -> Result<Self, ModelError> {
        if n1 > n || dd.rows() != n - n1 || dd.cols() != n - n1 {
            return Err(dim_err("Dd", format_args!("block of size {}x{} does not fit n={n}, n1={n1}", dd.rows(), dd.cols())));
        }
        let mut btilde = Mat::zeros(n, n);
        for i in 0..dd.rows() {
            for j in 0..dd.cols() {
                btilde[(n1 + i, n1 + j)] = dd[(i, j)];
            }
        }
        let kappa0 = if dd.rows() == 0 {
            0.0
        } else {
            symmetric_eigen(&dd.symmetric_part())?.0[0]
        };
        Ok(Self { btilde, kappa0 })
    }

    pub fn matrix(&self) -> &Mat {
        &self.btilde
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// The measured quantity the check is decided on.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub kappa0: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_SYMMETRY: &str = "symmetry";
pub const CHECK_STRICT_HYPERBOLICITY: &str = "strict_hyperbolicity";
pub const CHECK_NONZERO_SPEEDS: &str = "nonzero_speeds";
pub const CHECK_DAMPING_POSITIVITY: &str = "damping_positivity";
pub const CHECK_REGION: &str = "region";

/// Runs every structural check on a dimensionally consistent system.
pub fn validate_system(sys: &HyperbolicSystem) -> Result<ValidationReport, ModelError> {
    let a = sys.flux();
    let scale = a.max_abs();
    let mut checks = Vec::new();

    let asym = a.asymmetry();
    let sym_tol = 1e-12 * scale;
    checks.push(Check {
        name: CHECK_SYMMETRY,
        passed: asym <= sym_tol,
        measured: asym,
        threshold: sym_tol,
        detail: alloc::format!("max |A[i][j] - A[j][i]| = {asym:e}"),
    });

    let (lambdas, _) = symmetric_eigen(a)?;
    let spread = lambdas[lambdas.len() - 1] - lambdas[0];
    let min_gap = lambdas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let gap_tol = 1e-9 * spread;
    let distinct = lambdas.len() < 2 || (spread > 0.0 && min_gap > gap_tol);
    checks.push(Check {
        name: CHECK_STRICT_HYPERBOLICITY,
        passed: distinct,
        measured: if lambdas.len() < 2 { f64::INFINITY } else { min_gap },
        threshold: gap_tol,
        detail: alloc::format!("eigenvalues {lambdas:?}"),
    });

    let max_abs = lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let min_abs = lambdas.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    let zero_tol = 1e-9 * max_abs;
    checks.push(Check {
        name: CHECK_NONZERO_SPEEDS,
        passed: max_abs > 0.0 && min_abs > zero_tol,
        measured: min_abs,
        threshold: zero_tol,
        detail: alloc::format!("min |lambda| = {min_abs:e}"),
    });

    let damping = sys.full_damping()?;
    let kappa0 = damping.kappa0();
    checks.push(Check {
        name: CHECK_DAMPING_POSITIVITY,
        passed: sys.n2() > 0 && kappa0 > 0.0,
        measured: kappa0,
        threshold: 0.0,
        detail: alloc::format!("smallest eigenvalue of sym(Dd) = {kappa0:e}"),
    });

    let (region_ok, region_len, detail) = match sys.region() {
        Some(r) => {
            let ok = r.validate().is_ok();
            (ok, r.total_length(), alloc::format!("{} stripe(s), total length {}", r.stripes().len(), r.total_length()))
        }
        None => (true, 0.0, String::from("no undamped region: damping everywhere")),
    };
    checks.push(Check { name: CHECK_REGION, passed: region_ok, measured: region_len, threshold: 0.0, detail });

    Ok(ValidationReport { checks, kappa0 })
}

/// Eigenvalues in ascending order with an orthogonal eigenbasis.
pub fn diagonalize(a: &Mat) -> Result<EigenStructure, ModelError> {
    let (lambdas, basis) = symmetric_eigen(a)?;
    let negatives = lambdas.iter().filter(|&&l| l < 0.0).count();
    Ok(EigenStructure { lambdas, basis, negatives })
}

/// Shizuta–Kawashima check in eigenvector form: no eigenvector of `A` lies in
/// `Ker B̃`. In 1D the eigenvectors of `ξA` do not depend on `ξ ≠ 0`.
pub fn sk_check_eigvec(eigs: &EigenStructure, damping: &FullDampingMatrix) -> bool {
    let p = eigs.basis();
    (0..p.cols()).all(|j| {
        let v = p.column(j);
        let bv = damping.matrix().matvec(&v);
        let vn = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let bvn = bv.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        bvn > KERNEL_TOL * vn
    })
}

/// Kalman rank form of the same condition: `[B̃; B̃A; …; B̃A^{n−1}]` has rank `n`.
pub fn sk_check_kalman(a: &Mat, damping: &FullDampingMatrix) -> bool {
    let n = a.rows();
    let scale = a.max_abs();
    // Rank is invariant under scaling A, and normalising keeps the powers tame.
    let a = if scale > 0.0 { a.scale(1.0 / scale) } else { a.clone() };
    let b = damping.matrix();
    let mut stacked = Mat::zeros(n * n, n);
    let mut block = b.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                stacked[(k * n + i, j)] = block[(i, j)];
            }
        }
        block = block.matmul(&a);
    }
    rank(&stacked, KALMAN_RANK_TOL) == n
}

/// Coupling matrix of the diagonalized transport system, `Pᵀ B̃ P`.
pub fn source_matrix(eigs: &EigenStructure, damping: &FullDampingMatrix) -> Mat {
    let p = eigs.basis();
    p.transpose().matmul(damping.matrix()).matmul(p)
}
