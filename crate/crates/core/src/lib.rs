//! Delayed decay of 1D linear hyperbolic systems whose damping is switched
//! off on a bounded region.
//!
//! The crate is `no_std` (it needs `alloc`). Modules:
//!
//! - [`model`]: problem instances, diagonalization and the Shizuta–Kawashima
//!   checks in eigenvector and Kalman form.
//! - [`chartimes`]: entry/exit times of characteristics through the undamped
//!   stripes, the delays `τ̄` and `τ*`, and brute-force scan oracles.
//! - [`spectral`]: symbol, matrix exponential, spectral abscissa, the
//!   high-frequency rate `γ` and an exact Fourier evolver for `ω = ℝ`.
//! - [`solver`]: exact-shift transport with Strang-split damping.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod chartimes;
pub mod fft;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod spectral;

pub use chartimes::{Interval, UndampedRegion};
pub use linalg::Mat;
pub use model::{EigenStructure, FullDampingMatrix, HyperbolicSystem};
