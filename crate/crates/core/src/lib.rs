//! Reliability-aware beamforming for dual-function radar-communication (DFRC)
//! transmitters.
//!
//! A single transmit array of `N_t` antennas serves `M` single-antenna users
//! while illuminating `K` point targets. The beamforming matrix `W` (`N_t x M`)
//! is optimized for a weighted sum of radar mutual information and per-user
//! spectral efficiency, subject to rate and power constraints, with a sparsity
//! penalty that steers power away from unhealthy antennas or RF connections.
//!
//! Modules:
//! - [`scenario`]: system configuration, reliability masks, steering vectors,
//!   target response, radar covariance, random channels and received signals.
//! - [`metrics`]: SINR, spectral efficiency, radar MI, beampatterns and the
//!   reporting metrics (density, reliability, transmit power).
//! - [`gradients`]: conjugate (Wirtinger) gradients of the smooth Lagrangian and
//!   a finite-difference oracle.
//! - [`prox`]: reliability-weighted soft thresholding and row-group shrinkage.
//! - [`solver`]: the entrywise (PGDA) and antenna-selection (GPGDA) proximal
//!   gradient dual-ascent solvers.
//! - [`power`]: phased-array power consumption model.
//! - [`experiments`]: seeded Monte-Carlo sweeps, dynamic-requirement runs,
//!   beampattern studies and result export.
//! - [`selfcheck`]: gradient and prox verification against brute force.
//! - [`config`]: JSON scenario files.

pub mod config;
pub mod error;
pub mod experiments;
pub mod gradients;
pub mod metrics;
pub mod power;
pub mod prox;
pub mod rng;
pub mod scenario;
pub mod selfcheck;
pub mod solver;

pub use error::{DfrcError, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for every array quantity in the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
