use super::{dual_update, run, DualState, DualTargets, Formulation, Problem, SolveResult, SolverOptions, WarmStart};
use crate::gradients::{comm_value, comm_weights, grad_comm_unchecked, grad_radar_unchecked, radar_value};
use crate::metrics::tx_power;
use crate::prox::{prox_elementwise, ThresholdPlan};
use crate::scenario::{BeamformingMatrix, ReliabilityMask};
use crate::{CMatrix, Complex64, DfrcError, Result};

struct Entrywise<'a> {
    problem: &'a Problem,
    mask: &'a ReliabilityMask,
    rho_s: f64,
}

impl Formulation for Entrywise<'_> {
    fn problem(&self) -> &Problem {
        self.problem
    }

    fn rho_s(&self) -> f64 {
        self.rho_s
    }

    fn mask(&self) -> &ReliabilityMask {
        self.mask
    }

    fn lagrangian(&self, w: &CMatrix, duals: &DualState) -> f64 {
        let cfg = &self.problem.config;
        let weights = comm_weights(cfg, duals);
        radar_value(w, self.problem.covariance.matrix(), cfg.sigma2_r, cfg.bw_fraction_radar)
            + comm_value(w, &self.problem.channel.h, cfg.sigma2_c, &weights)
            - duals.mu * w.norm_squared()
    }

    fn gradient(&self, w: &CMatrix, duals: &DualState) -> CMatrix {
        let cfg = &self.problem.config;
        let weights = comm_weights(cfg, duals);
        grad_radar_unchecked(w, self.problem.covariance.matrix(), cfg.sigma2_r, cfg.bw_fraction_radar)
            + grad_comm_unchecked(w, &self.problem.channel.h, cfg.sigma2_c, &weights)
            - w * Complex64::from(duals.mu)
    }

    fn prox(&self, w: BeamformingMatrix, eta: f64, _duals: &DualState) -> Result<BeamformingMatrix> {
        if self.rho_s == 0.0 {
            return Ok(w);
        }
        match ThresholdPlan::elementwise(self.mask, w.n_users(), eta, self.rho_s) {
            ThresholdPlan::Elementwise(k) => prox_elementwise(&w, &k),
            ThresholdPlan::Rows(_) => unreachable!(),
        }
    }

    fn penalty(&self, w: &BeamformingMatrix) -> f64 {
        let mut total = 0.0;
        for j in 0..w.n_users() {
            for i in 0..w.n_tx() {
                total += (1.0 - self.mask.value(i, j)) * w[(i, j)].norm();
            }
        }
        self.rho_s * total
    }

    fn update_duals(&self, duals: &DualState, w: &BeamformingMatrix, se: &[f64], alpha: f64) -> Result<DualState> {
        let cfg = &self.problem.config;
        Ok(dual_update(
            duals,
            se,
            tx_power(w),
            DualTargets {
                rate_min: &cfg.rate_min,
                rate_max: Some(&cfg.rate_max),
                power_budget: cfg.power_budget,
            },
            alpha,
        ))
    }
}

/// Reliability-aware selective beamforming with entrywise sparsity.
///
/// Maximizes `rho_r MI + sum_j rho_j SE_j - rho_s sum_ij (1 - beta_ij) |w_ij|`
/// subject to `Rmin_j <= SE_j <= Rmax_j` and `trace(W W^H) <= P_t`, with
/// `rho_s` taken from `problem.config.sparsity_weight`. The mask must be
/// per-entry.
pub fn pgda_solve(
    problem: &Problem,
    mask: &ReliabilityMask,
    start: WarmStart,
    options: &SolverOptions,
) -> Result<SolveResult> {
    if !matches!(mask, ReliabilityMask::PerEntry(_)) {
        return Err(DfrcError::invalid("entrywise solver needs a per-entry reliability mask"));
    }
    let form = Entrywise {
        problem,
        mask,
        rho_s: problem.config.sparsity_weight,
    };
    run(&form, start, options)
}
