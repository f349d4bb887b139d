//! Proximal-gradient dual-ascent solvers.
//!
//! Each outer iteration takes one backtracking gradient-ascent step on the
//! smooth Lagrangian (multipliers frozen), applies the sparsity prox with the
//! accepted step size, then moves every multiplier by one projected
//! dual-ascent step. Iteration stops when `||W_{k+1} - W_k||_F < tol` or after
//! `max_iter` iterations.
//!
//! [`pgda_solve`] penalizes individual weights by `rho_s (1 - beta_ij) |w_ij|`
//! under a transmit power budget. [`gpgda_solve`] penalizes whole antenna rows
//! by `rho_s (1 - beta'_i) ||w_i||` under a hybrid budget that also charges
//! `P_A` per unit of row norm, which selects antennas.

mod dual;
mod gpgda;
mod linesearch;
mod pgda;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dual::{dual_update, DualTargets};
pub use gpgda::{gpgda_solve, GpgdaPowerParams};
pub use linesearch::{backtrack_step, LineSearchOutcome};
pub use pgda::pgda_solve;

use crate::metrics::{mi_unchecked, tx_power, MetricsRecord, SinrTerms};
use crate::scenario::{
    radar_covariance, BeamformingMatrix, CommChannel, RadarCovariance, RadarScene, ReliabilityMask,
    SystemConfig,
};
use crate::{CMatrix, DfrcError, Result};

/// Lagrange multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    /// Minimum-rate multipliers, one per user.
    pub lambda1: Vec<f64>,
    /// Maximum-rate multipliers, one per user.
    pub lambda2: Vec<f64>,
    /// Power-budget multiplier.
    pub mu: f64,
}

impl DualState {
    pub fn zeros(n_users: usize) -> Self {
        DualState {
            lambda1: vec![0.0; n_users],
            lambda2: vec![0.0; n_users],
            mu: 0.0,
        }
    }

    /// Entrywise solver start: `lambda1 = 0.04`, `lambda2 = 0.06`, `mu = 0.05`.
    pub fn pgda_initial(n_users: usize) -> Self {
        DualState {
            lambda1: vec![0.04; n_users],
            lambda2: vec![0.06; n_users],
            mu: 0.05,
        }
    }

    /// Antenna-selection start: rate multipliers 0.04, power multiplier 0.05,
    /// no rate ceiling.
    pub fn gpgda_initial(n_users: usize) -> Self {
        DualState {
            lambda1: vec![0.04; n_users],
            lambda2: vec![0.0; n_users],
            mu: 0.05,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lambda1.iter().chain(&self.lambda2).all(|v| *v >= 0.0) && self.mu >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Dual step size `alpha`.
    pub dual_step: f64,
    /// Initial primal step `eta0`, restored at every outer iteration.
    pub primal_step: f64,
    pub backtrack_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub eta_min: f64,
    /// Freeze the multipliers at their starting values.
    pub freeze_duals: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dual_step: 0.025,
            primal_step: 0.025,
            backtrack_factor: 0.5,
            tol: 1e-12,
            max_iter: 1000,
            max_backtracks: 50,
            eta_min: 1e-12,
            freeze_duals: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(DfrcError::invalid("backtrack_factor must lie in (0, 1)"));
        }
        if !(self.tol > 0.0 && self.dual_step > 0.0 && self.primal_step > 0.0 && self.eta_min > 0.0) {
            return Err(DfrcError::invalid("step sizes and tolerance must be positive"));
        }
        if self.max_iter == 0 || self.max_backtracks == 0 {
            return Err(DfrcError::invalid("max_iter and max_backtracks must be positive"));
        }
        Ok(())
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `rho_r MI + sum_j rho_j SE_j`.
    pub objective: f64,
    pub radar_mi: f64,
    /// `sum_j rho_j SE_j`.
    pub comm_weighted: f64,
    pub sparsity_penalty: f64,
    pub tx_power: f64,
    pub se_per_user: Vec<f64>,
    pub duals: DualState,
    pub eta: f64,
    pub step_norm: f64,
}

impl IterationRecord {
    fn is_finite(&self) -> bool {
        [
            self.objective,
            self.radar_mi,
            self.comm_weighted,
            self.sparsity_penalty,
            self.tx_power,
            self.step_norm,
        ]
        .iter()
        .chain(&self.se_per_user)
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn csv_header(n_users: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "iteration",
            "objective",
            "radar_mi",
            "comm_weighted",
            "sparsity_penalty",
            "tx_power",
        ]
        .map(String::from)
        .to_vec();
        h.extend((1..=n_users).map(|j| format!("se_{j}")));
        h.extend((1..=n_users).map(|j| format!("lambda1_{j}")));
        h.extend((1..=n_users).map(|j| format!("lambda2_{j}")));
        h.extend(["mu", "eta", "step_norm"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W, n_users: usize) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(Self::csv_header(n_users))?;
        for r in &self.records {
            let mut row = vec![
                r.iteration.to_string(),
                r.objective.to_string(),
                r.radar_mi.to_string(),
                r.comm_weighted.to_string(),
                r.sparsity_penalty.to_string(),
                r.tx_power.to_string(),
            ];
            row.extend(r.se_per_user.iter().map(f64::to_string));
            row.extend(r.duals.lambda1.iter().map(f64::to_string));
            row.extend(r.duals.lambda2.iter().map(f64::to_string));
            row.extend([r.duals.mu, r.eta, r.step_norm].map(|v| v.to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, n_users: usize) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| DfrcError::io(path, e))?;
        self.write_csv(file, n_users).map_err(|source| DfrcError::Csv {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w_star: BeamformingMatrix,
    pub duals: DualState,
    pub trace: ConvergenceTrace,
    pub metrics: MetricsRecord,
    pub converged: bool,
    pub iterations: usize,
}

/// Everything fixed during one solve: configuration, radar covariance and
/// channel.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: SystemConfig,
    pub covariance: RadarCovariance,
    pub channel: CommChannel,
}

impl Problem {
    pub fn new(config: SystemConfig, scene: &RadarScene, channel: CommChannel) -> Result<Self> {
        config.validate()?;
        let covariance = radar_covariance(scene, config.n_tx, config.spacing, config.wavelength)?;
        Self::from_parts(config, covariance, channel)
    }

    pub fn from_parts(config: SystemConfig, covariance: RadarCovariance, channel: CommChannel) -> Result<Self> {
        if channel.n_tx() != config.n_tx || channel.n_users() != config.n_users {
            return Err(DfrcError::invalid("channel does not match configuration"));
        }
        if covariance.dim() != config.n_tx {
            return Err(DfrcError::invalid("covariance does not match configuration"));
        }
        Ok(Problem {
            config,
            covariance,
            channel,
        })
    }

    pub(crate) fn se(&self, w: &CMatrix) -> Vec<f64> {
        SinrTerms::compute(&self.channel.h, w, self.config.sigma2_c).se()
    }

    pub(crate) fn mi(&self, w: &CMatrix) -> f64 {
        mi_unchecked(self.covariance.matrix(), w, self.config.sigma2_r).max(0.0)
    }
}

/// Starting point of a solve.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub w: BeamformingMatrix,
    pub duals: DualState,
}

/// One solver variant plugged into the shared iteration.
pub(crate) trait Formulation {
    fn problem(&self) -> &Problem;
    fn rho_s(&self) -> f64;
    fn mask(&self) -> &ReliabilityMask;
    /// Smooth Lagrangian up to constants in `W`.
    fn lagrangian(&self, w: &CMatrix, duals: &DualState) -> f64;
    fn gradient(&self, w: &CMatrix, duals: &DualState) -> CMatrix;
    fn prox(&self, w: BeamformingMatrix, eta: f64, duals: &DualState) -> Result<BeamformingMatrix>;
    fn penalty(&self, w: &BeamformingMatrix) -> f64;
    fn update_duals(&self, duals: &DualState, w: &BeamformingMatrix, se: &[f64], alpha: f64) -> Result<DualState>;
}

pub(crate) fn run<F: Formulation>(form: &F, start: WarmStart, options: &SolverOptions) -> Result<SolveResult> {
    options.validate()?;
    let problem = form.problem();
    let cfg = &problem.config;
    if start.w.shape() != (cfg.n_tx, cfg.n_users) {
        return Err(DfrcError::invalid("initial beamformer does not match configuration"));
    }
    if start.duals.lambda1.len() != cfg.n_users || start.duals.lambda2.len() != cfg.n_users {
        return Err(DfrcError::invalid("initial duals do not match user count"));
    }
    form.mask().check_dims(cfg.n_tx, cfg.n_users)?;

    let mut w = start.w;
    let mut duals = start.duals;
    let mut trace = ConvergenceTrace::default();
    let mut converged = false;

    for iteration in 0..options.max_iter {
        let grad = form.gradient(w.matrix(), &duals);
        let step = backtrack_step(
            w.matrix(),
            &grad,
            options.primal_step,
            |x| form.lagrangian(x, &duals),
            options.backtrack_factor,
            options.max_backtracks,
            options.eta_min,
        );
        let w_next = form.prox(step.w.into(), step.eta, &duals)?;
        let step_norm = (w_next.matrix() - w.matrix()).norm();

        let se = problem.se(w_next.matrix());
        let mi = problem.mi(w_next.matrix());
        if !options.freeze_duals {
            duals = form.update_duals(&duals, &w_next, &se, options.dual_step)?;
        }
        let comm_weighted: f64 = se.iter().zip(&cfg.bw_fractions_users).map(|(s, r)| s * r).sum();
        let record = IterationRecord {
            iteration,
            objective: cfg.bw_fraction_radar * mi + comm_weighted,
            radar_mi: mi,
            comm_weighted,
            sparsity_penalty: form.penalty(&w_next),
            tx_power: tx_power(&w_next),
            se_per_user: se,
            duals: duals.clone(),
            eta: step.eta,
            step_norm,
        };
        let finite = record.is_finite() && w_next.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        trace.records.push(record);
        if !finite {
            return Err(DfrcError::Diverged {
                iteration,
                trace: Box::new(trace),
            });
        }
        w = w_next;
        if step_norm < options.tol {
            converged = true;
            break;
        }
    }

    let metrics = MetricsRecord::evaluate(cfg, &problem.covariance, &problem.channel, &w, form.mask(), form.rho_s())?;
    Ok(SolveResult {
        iterations: trace.len(),
        w_star: w,
        duals,
        trace,
        metrics,
        converged,
    })
}
