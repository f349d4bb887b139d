//! Phased-array power consumption model.
//!
//! Total consumption is the PA draw `P / eta` plus, per antenna element, two
//! DACs and an RF chain (two mixers, two low-pass filters, one hybrid with
//! buffer). Coefficient units are opaque; the defaults zero every circuit term
//! so that the total reduces to `P / eta`.

use serde::{Deserialize, Serialize};

use crate::metrics::tx_power;
use crate::scenario::BeamformingMatrix;
use crate::{DfrcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModelParams {
    pub eta_pa: f64,
    pub dac_resolution: u32,
    pub sampling_rate: f64,
    pub c1: f64,
    pub c2: f64,
    pub p_mixer: f64,
    pub p_lpf: f64,
    pub p_hybrid_buffer: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        PowerModelParams {
            eta_pa: 0.4,
            dac_resolution: 1,
            sampling_rate: 0.0,
            c1: 0.0,
            c2: 0.0,
            p_mixer: 0.0,
            p_lpf: 0.0,
            p_hybrid_buffer: 0.0,
        }
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_pa > 0.0 && self.eta_pa <= 1.0) {
            return Err(DfrcError::invalid("PA efficiency must lie in (0, 1]"));
        }
        if self.dac_resolution < 1 {
            return Err(DfrcError::invalid("DAC resolution must be at least one bit"));
        }
        let coeffs = [
            self.sampling_rate,
            self.c1,
            self.c2,
            self.p_mixer,
            self.p_lpf,
            self.p_hybrid_buffer,
        ];
        if coeffs.iter().any(|v| !(*v >= 0.0)) {
            return Err(DfrcError::invalid("power model coefficients must be nonnegative"));
        }
        Ok(())
    }

    /// `2 P_M + 2 P_LF + P_HB`.
    pub fn rf_chain_power(&self) -> f64 {
        2.0 * self.p_mixer + 2.0 * self.p_lpf + self.p_hybrid_buffer
    }
}

/// Power drawn by the amplifiers for a radiated power `p`.
pub fn pa_power(p: f64, eta_pa: f64) -> Result<f64> {
    if !(eta_pa > 0.0) {
        return Err(DfrcError::invalid("PA efficiency must be positive"));
    }
    Ok(p / eta_pa)
}

/// `c1 f q + c2 2^q`.
pub fn dac_power(params: &PowerModelParams) -> f64 {
    let q = params.dac_resolution as f64;
    params.c1 * params.sampling_rate * q + params.c2 * q.exp2()
}

pub fn total_power(w: &BeamformingMatrix, params: &PowerModelParams, n_tx: usize) -> Result<f64> {
    let per_antenna = 2.0 * dac_power(params) + params.rf_chain_power();
    Ok(pa_power(tx_power(w), params.eta_pa)? + n_tx as f64 * per_antenna)
}

/// Power budget surrogate used for antenna selection:
/// `sum_j ||w_j||^2 / eta + P_A sum_i ||w_i^r||_2`.
pub fn hybrid_power_surrogate(w: &BeamformingMatrix, eta_pa: f64, p_antenna: f64) -> Result<f64> {
    let radiated = pa_power(tx_power(w), eta_pa)?;
    let rows: f64 = (0..w.n_tx()).map(|i| w.row_norm(i)).sum();
    Ok(radiated + p_antenna * rows)
}
