use serde::{Deserialize, Serialize};

use super::{dual_update, run, DualState, DualTargets, Formulation, Problem, SolveResult, SolverOptions, WarmStart};
use crate::gradients::{comm_value, comm_weights, grad_comm_unchecked, grad_radar_unchecked, radar_value};
use crate::power::hybrid_power_surrogate;
use crate::prox::prox_group_rows;
use crate::scenario::{BeamformingMatrix, ReliabilityMask};
use crate::{CMatrix, Complex64, DfrcError, Result};

/// Hybrid power budget for antenna selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpgdaPowerParams {
    /// Power-amplifier efficiency, in `(0, 1]`.
    pub eta_pa: f64,
    /// Activation power charged per unit of antenna row norm.
    pub p_antenna: f64,
    /// Total budget.
    pub p_total: f64,
}

impl Default for GpgdaPowerParams {
    fn default() -> Self {
        GpgdaPowerParams {
            eta_pa: 0.4,
            p_antenna: 5.0,
            p_total: 100.0,
        }
    }
}

impl GpgdaPowerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_pa > 0.0 && self.eta_pa <= 1.0) {
            return Err(DfrcError::invalid("PA efficiency must lie in (0, 1]"));
        }
        if !(self.p_antenna >= 0.0) || !(self.p_total > 0.0) {
            return Err(DfrcError::invalid("invalid hybrid power parameters"));
        }
        Ok(())
    }
}

struct RowGroup<'a> {
    problem: &'a Problem,
    mask: &'a ReliabilityMask,
    power: &'a GpgdaPowerParams,
    rho_s: f64,
}

impl Formulation for RowGroup<'_> {
    fn problem(&self) -> &Problem {
        self.problem
    }

    fn rho_s(&self) -> f64 {
        self.rho_s
    }

    fn mask(&self) -> &ReliabilityMask {
        self.mask
    }

    // `duals.mu` is the hybrid power multiplier; `lambda1` the rate multipliers.
    fn lagrangian(&self, w: &CMatrix, duals: &DualState) -> f64 {
        let cfg = &self.problem.config;
        let weights = comm_weights(cfg, duals);
        radar_value(w, self.problem.covariance.matrix(), cfg.sigma2_r, cfg.bw_fraction_radar)
            + comm_value(w, &self.problem.channel.h, cfg.sigma2_c, &weights)
            - duals.mu * w.norm_squared() / self.power.eta_pa
    }

    fn gradient(&self, w: &CMatrix, duals: &DualState) -> CMatrix {
        let cfg = &self.problem.config;
        let weights = comm_weights(cfg, duals);
        grad_radar_unchecked(w, self.problem.covariance.matrix(), cfg.sigma2_r, cfg.bw_fraction_radar)
            + grad_comm_unchecked(w, &self.problem.channel.h, cfg.sigma2_c, &weights)
            - w * Complex64::from(duals.mu / self.power.eta_pa)
    }

    fn prox(&self, w: BeamformingMatrix, eta: f64, duals: &DualState) -> Result<BeamformingMatrix> {
        let activation = duals.mu * self.power.p_antenna;
        let thresholds: Vec<f64> = (0..w.n_tx())
            .map(|i| eta * (self.rho_s * (1.0 - self.mask.value(i, 0)) + activation))
            .collect();
        prox_group_rows(&w, &thresholds)
    }

    fn penalty(&self, w: &BeamformingMatrix) -> f64 {
        self.rho_s
            * (0..w.n_tx())
                .map(|i| (1.0 - self.mask.value(i, 0)) * w.row_norm(i))
                .sum::<f64>()
    }

    fn update_duals(&self, duals: &DualState, w: &BeamformingMatrix, se: &[f64], alpha: f64) -> Result<DualState> {
        let hybrid = hybrid_power_surrogate(w, self.power.eta_pa, self.power.p_antenna)?;
        Ok(dual_update(
            duals,
            se,
            hybrid,
            DualTargets {
                rate_min: &self.problem.config.rate_min,
                rate_max: None,
                power_budget: self.power.p_total,
            },
            alpha,
        ))
    }
}

/// Antenna selection by row-group sparsity.
///
/// Maximizes `rho_r MI + sum_j rho_j SE_j - rho_s sum_i (1 - beta'_i) ||w_i^r||`
/// subject to `SE_j >= Rmin_j` and the hybrid budget
/// `||W||_F^2 / eta_pa + P_A sum_i ||w_i^r|| <= P_tot`. The quadratic part of
/// the budget enters the gradient step, the row-norm part the group prox.
/// `rho_s` comes from `problem.config.sparsity_weight`; the mask must be
/// per-antenna.
pub fn gpgda_solve(
    problem: &Problem,
    mask: &ReliabilityMask,
    power: &GpgdaPowerParams,
    start: WarmStart,
    options: &SolverOptions,
) -> Result<SolveResult> {
    if !matches!(mask, ReliabilityMask::PerAntenna(_)) {
        return Err(DfrcError::invalid("antenna selection needs a per-antenna reliability mask"));
    }
    power.validate()?;
    let form = RowGroup {
        problem,
        mask,
        power,
        rho_s: problem.config.sparsity_weight,
    };
    run(&form, start, options)
}
