//! Conjugate (Wirtinger, `d/dW*`) gradients of the smooth part of the
//! Lagrangian.
//!
//! For a real functional `f`, `G = df/dW*` is half the real gradient, so
//! `W + eta * G` is an ascent step for small `eta`. The same convention is
//! used by [`fd_oracle`], which is the reference every analytic gradient here
//! is tested against.

use std::f64::consts::LN_2;

use crate::metrics::{mi_inner, mi_unchecked, tx_power, SinrTerms};
use crate::scenario::{BeamformingMatrix, CommChannel, RadarCovariance, SystemConfig};
use crate::solver::DualState;
use crate::{CMatrix, Complex64, DfrcError, Result};

/// Ascent direction for `W`, same shape as `W`.
pub type SmoothGradient = CMatrix;

/// Gradient of `rho_r * log2 det(I + W^H R W / sigma2_r)`:
/// `rho_r / sigma2_r * R W (I + W^H R W / sigma2_r)^-1 / ln 2`.
pub fn grad_radar(
    w: &BeamformingMatrix,
    r: &RadarCovariance,
    sigma2_r: f64,
    rho_r: f64,
) -> Result<SmoothGradient> {
    if !(sigma2_r > 0.0) {
        return Err(DfrcError::invalid("radar noise variance must be positive"));
    }
    if r.dim() != w.n_tx() {
        return Err(DfrcError::invalid("covariance does not match transmit dimension"));
    }
    Ok(grad_radar_unchecked(w.matrix(), r.matrix(), sigma2_r, rho_r))
}

pub(crate) fn grad_radar_unchecked(w: &CMatrix, r: &CMatrix, sigma2_r: f64, rho_r: f64) -> CMatrix {
    if rho_r == 0.0 {
        return CMatrix::zeros(w.nrows(), w.ncols());
    }
    let rw = r * w;
    let inner = mi_inner(r, w, sigma2_r);
    // inner is Hermitian positive definite: (R W) inner^-1 = (inner^-1 (R W)^H)^H.
    let solved = match inner.clone().cholesky() {
        Some(chol) => chol.solve(&rw.adjoint()).adjoint(),
        None => {
            let inv = inner
                .try_inverse()
                .expect("I + W^H R W is nonsingular for PSD R");
            rw * inv
        }
    };
    solved * Complex64::from(rho_r / (sigma2_r * LN_2))
}

/// Gradient of `sum_m weights[m] * log2(1 + gamma_m)`.
///
/// Column `k` collects user `k`'s own-signal term and the interference terms
/// that `w_k` causes at every other user.
pub fn grad_comm(
    w: &BeamformingMatrix,
    channel: &CommChannel,
    sigma2_c: f64,
    weights: &[f64],
) -> Result<SmoothGradient> {
    if !(sigma2_c > 0.0) {
        return Err(DfrcError::invalid("communication noise variance must be positive"));
    }
    if channel.h.shape() != w.shape() {
        return Err(DfrcError::invalid("channel does not match beamformer shape"));
    }
    if weights.len() != w.n_users() {
        return Err(DfrcError::invalid(format!(
            "{} weights for {} users",
            weights.len(),
            w.n_users()
        )));
    }
    Ok(grad_comm_unchecked(w.matrix(), &channel.h, sigma2_c, weights))
}

pub(crate) fn grad_comm_unchecked(w: &CMatrix, h: &CMatrix, sigma2_c: f64, weights: &[f64]) -> CMatrix {
    let m_users = w.ncols();
    let terms = SinrTerms::compute(h, w, sigma2_c);
    // gains[(m, k)] = h_m^H w_k
    let mut gains = h.adjoint() * w;
    for m in 0..m_users {
        let gamma = terms.gamma(m);
        let base = weights[m] / ((1.0 + gamma) * terms.denom[m] * LN_2);
        let own = base;
        let cross = -base * gamma;
        for k in 0..m_users {
            gains[(m, k)] *= if k == m { own } else { cross };
        }
    }
    h * gains
}

/// Gradient of `-mu * trace(W W^H)`, i.e. `-mu * W`.
pub fn grad_power_term(w: &BeamformingMatrix, mu: f64) -> SmoothGradient {
    w.matrix() * Complex64::from(-mu)
}

/// Per-user weights of the rate terms in the entrywise Lagrangian:
/// `rho_j + lambda1_j - lambda2_j`.
pub fn comm_weights(config: &SystemConfig, duals: &DualState) -> Vec<f64> {
    config
        .bw_fractions_users
        .iter()
        .zip(duals.lambda1.iter().zip(&duals.lambda2))
        .map(|(rho, (l1, l2))| rho + l1 - l2)
        .collect()
}

fn check_duals(config: &SystemConfig, duals: &DualState) -> Result<()> {
    if duals.lambda1.len() != config.n_users || duals.lambda2.len() != config.n_users {
        return Err(DfrcError::invalid("dual state does not match user count"));
    }
    Ok(())
}

/// Smooth Lagrangian of the entrywise problem:
///
/// `rho_r MI + sum_j rho_j SE_j + sum_j lambda1_j (SE_j - Rmin_j)
///  + sum_j lambda2_j (Rmax_j - SE_j) + mu (P_t - trace(W W^H))`.
pub fn smooth_lagrangian(
    w: &BeamformingMatrix,
    r: &RadarCovariance,
    channel: &CommChannel,
    duals: &DualState,
    config: &SystemConfig,
) -> Result<f64> {
    check_duals(config, duals)?;
    let mi = crate::metrics::radar_mi(r, w, config.sigma2_r)?;
    let se = crate::metrics::spectral_efficiencies(channel, w, config.sigma2_c)?;
    let mut value = config.bw_fraction_radar * mi;
    for j in 0..config.n_users {
        value += config.bw_fractions_users[j] * se[j]
            + duals.lambda1[j] * (se[j] - config.rate_min[j])
            + duals.lambda2[j] * (config.rate_max[j] - se[j]);
    }
    Ok(value + duals.mu * (config.power_budget - tx_power(w)))
}

/// Gradient of [`smooth_lagrangian`].
pub fn grad_lagrangian_smooth(
    w: &BeamformingMatrix,
    r: &RadarCovariance,
    channel: &CommChannel,
    duals: &DualState,
    config: &SystemConfig,
) -> Result<SmoothGradient> {
    check_duals(config, duals)?;
    let weights = comm_weights(config, duals);
    Ok(grad_radar(w, r, config.sigma2_r, config.bw_fraction_radar)?
        + grad_comm(w, channel, config.sigma2_c, &weights)?
        + grad_power_term(w, duals.mu))
}

/// Weighted rate term value, used by tests and the self-check.
pub(crate) fn comm_value(w: &CMatrix, h: &CMatrix, sigma2_c: f64, weights: &[f64]) -> f64 {
    SinrTerms::compute(h, w, sigma2_c)
        .se()
        .iter()
        .zip(weights)
        .map(|(s, wt)| s * wt)
        .sum()
}

pub(crate) fn radar_value(w: &CMatrix, r: &CMatrix, sigma2_r: f64, rho_r: f64) -> f64 {
    rho_r * mi_unchecked(r, w, sigma2_r)
}

/// Default central-difference step for [`fd_oracle`].
pub fn default_fd_step(w: &CMatrix) -> f64 {
    let max = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    1e-6 * (1.0 + max)
}

/// Numerical conjugate gradient of a real functional by central differences
/// along the real and imaginary axis of every entry:
/// `(df/dRe + j df/dIm) / 2`.
pub fn fd_oracle<F>(f: F, w: &CMatrix, step: Option<f64>) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> f64,
{
    let h = step.unwrap_or_else(|| default_fd_step(w));
    if !(h > 0.0) {
        return Err(DfrcError::invalid("finite-difference step must be positive"));
    }
    let eval = |x: &CMatrix| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DfrcError::Evaluation(format!("functional returned {v}")))
        }
    };
    let mut out = CMatrix::zeros(w.nrows(), w.ncols());
    let mut probe = w.clone();
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let orig = w[(i, j)];
            let mut diff = |delta: Complex64| -> Result<f64> {
                probe[(i, j)] = orig + delta;
                let plus = eval(&probe)?;
                probe[(i, j)] = orig - delta;
                let minus = eval(&probe)?;
                probe[(i, j)] = orig;
                Ok((plus - minus) / (2.0 * h))
            };
            let d_re = diff(Complex64::new(h, 0.0))?;
            let d_im = diff(Complex64::new(0.0, h))?;
            out[(i, j)] = Complex64::new(d_re / 2.0, d_im / 2.0);
        }
    }
    Ok(out)
}

/// `||a - b||_F / ||b||_F`, falling back to the absolute error when `b` is
/// (numerically) zero.
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
