//! Self-verification: analytic gradients against finite differences, prox
//! operators against brute-force minimization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gradients::{fd_oracle, grad_lagrangian_smooth, relative_error, smooth_lagrangian};
use crate::prox::{prox_group_rows, soft_threshold_entry};
use crate::rng::{complex_gaussian, complex_gaussian_matrix, stream_rng, Stream};
use crate::scenario::{radar_covariance, sample_channel, BeamformingMatrix, RadarScene, SystemConfig};
use crate::solver::DualState;
use crate::{CMatrix, Complex64, Result};

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
/// Grid spacing of the scalar brute force.
pub const SCALAR_GRID: f64 = 1e-4;
pub const GROUP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub instances: usize,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= GRADIENT_TOLERANCE
    }
}

/// Small system used by the gradient check: 6 antennas, 3 users, 2 targets.
pub fn gradcheck_config() -> SystemConfig {
    let mut cfg = SystemConfig::mmwave_28ghz();
    cfg.n_tx = 6;
    cfg.n_rx = 6;
    cfg.frame_len = 6;
    cfg.n_users = 3;
    cfg.n_targets = 2;
    let share = (1.0 - cfg.bw_fraction_radar) / 3.0;
    cfg.bw_fractions_users = vec![share; 3];
    cfg.rate_min = vec![0.015; 3];
    cfg.rate_max = vec![2.5; 3];
    cfg
}

/// Compares the smooth-Lagrangian gradient with central differences on
/// `n_instances` random instances (channel, scene, beamformer, multipliers).
pub fn gradcheck(config: &SystemConfig, n_instances: usize, seed: u64) -> Result<GradCheckReport> {
    config.validate()?;
    let mut worst: f64 = 0.0;
    for k in 0..n_instances as u64 {
        let s = seed.wrapping_add(k);
        let scene = RadarScene::random(&mut stream_rng(s, Stream::Scene), config.n_targets);
        let r = radar_covariance(&scene, config.n_tx, config.spacing, config.wavelength)?;
        let channel = sample_channel(&mut stream_rng(s, Stream::Channel), config.n_tx, config.n_users);
        let mut rng = stream_rng(s, Stream::InitialBeamformer);
        let w: BeamformingMatrix = complex_gaussian_matrix(&mut rng, config.n_tx, config.n_users, 1.0 / config.n_tx as f64).into();
        let m = config.n_users;
        let duals = DualState {
            lambda1: (0..m).map(|_| rng.random_range(0.0..0.5)).collect(),
            lambda2: (0..m).map(|_| rng.random_range(0.0..0.5)).collect(),
            mu: rng.random_range(0.0..0.5),
        };
        let analytic = grad_lagrangian_smooth(&w, &r, &channel, &duals, config)?;
        let f = |x: &CMatrix| {
            smooth_lagrangian(&BeamformingMatrix::new(x.clone()), &r, &channel, &duals, config).unwrap_or(f64::NAN)
        };
        let numeric = fd_oracle(f, w.matrix(), None)?;
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(GradCheckReport {
        instances: n_instances,
        max_relative_error: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxCheckReport {
    pub samples: usize,
    /// Largest gap between soft thresholding and a grid search of
    /// `kappa |x| + |x - w|^2 / 2`.
    pub scalar_max_error: f64,
    /// Largest gap between row shrinkage and a search along the row direction.
    pub group_max_error: f64,
}

impl ProxCheckReport {
    pub fn passed(&self) -> bool {
        self.scalar_max_error <= SCALAR_GRID && self.group_max_error <= GROUP_TOLERANCE
    }
}

/// Minimizer over `t` in `[0, hi]` of `c t + (r - t)^2 / 2` on a grid of
/// spacing `step`.
fn grid_argmin(c: f64, r: f64, hi: f64, step: f64) -> f64 {
    let n = (hi / step).ceil() as usize;
    let obj = |t: f64| c * t + 0.5 * (r - t) * (r - t);
    (0..=n)
        .map(|k| (k as f64 * step).min(hi))
        .fold((0.0, f64::INFINITY), |best, t| {
            let v = obj(t);
            if v < best.1 {
                (t, v)
            } else {
                best
            }
        })
        .0
}

/// Golden-section minimization of the same objective.
fn golden_argmin(c: f64, r: f64, hi: f64) -> f64 {
    let obj = |t: f64| c * t + 0.5 * (r - t) * (r - t);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    while b - a > 1e-10 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if obj(x1) <= obj(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let t = 0.5 * (a + b);
    if obj(0.0) <= obj(t) {
        0.0
    } else {
        t
    }
}

/// Checks both prox operators on `n_samples` random scalars and rows.
///
/// Both objectives are minimized along the ray through the input: for any
/// point off that ray, rotating it onto the ray keeps the norm and shrinks
/// the distance term, so the search is one-dimensional in the magnitude.
pub fn proxcheck(n_samples: usize, seed: u64) -> Result<ProxCheckReport> {
    let mut rng = stream_rng(seed, Stream::Noise);
    let mut scalar_err: f64 = 0.0;
    for _ in 0..n_samples {
        let w = complex_gaussian(&mut rng, 1.0);
        let kappa = rng.random_range(0.0..1.5);
        let got = soft_threshold_entry(w, kappa);
        let mag = grid_argmin(kappa, w.norm(), w.norm(), SCALAR_GRID / 2.0);
        let want = if w.norm() > 0.0 {
            w * (mag / w.norm())
        } else {
            Complex64::new(0.0, 0.0)
        };
        scalar_err = scalar_err.max((got - want).norm());
    }

    let mut group_err: f64 = 0.0;
    for _ in 0..n_samples {
        let m = rng.random_range(1..=6);
        let row = complex_gaussian_matrix(&mut rng, 1, m, 1.0);
        let norm = row.norm();
        let tau = rng.random_range(0.0..2.0 * norm.max(1e-3));
        let got = prox_group_rows(&row.clone().into(), &[tau])?;
        let mag = golden_argmin(tau, norm, norm);
        let want = if norm > 0.0 {
            &row * Complex64::from(mag / norm)
        } else {
            row.clone()
        };
        group_err = group_err.max((got.matrix() - want).norm());
    }

    Ok(ProxCheckReport {
        samples: n_samples,
        scalar_max_error: scalar_err,
        group_max_error: group_err,
    })
}
