//! Proximal operators of the reliability-weighted sparsity penalties.

use nalgebra::{DMatrix, DVector};

use crate::scenario::{BeamformingMatrix, ReliabilityMask};
use crate::{CMatrix, Complex64, DfrcError, Result};

/// Thresholds for one prox application.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPlan {
    /// `kappa_ij = eta * rho_s * (1 - beta_ij)`.
    Elementwise(DMatrix<f64>),
    /// `tau_i = eta * (rho_s * (1 - beta'_i) + lambda * P_A)`.
    Rows(DVector<f64>),
}

impl ThresholdPlan {
    /// Entrywise plan. A per-antenna mask applies its value to the whole row.
    pub fn elementwise(mask: &ReliabilityMask, n_users: usize, eta: f64, rho_s: f64) -> Self {
        let n = mask.n_tx();
        ThresholdPlan::Elementwise(DMatrix::from_fn(n, n_users, |i, j| {
            eta * rho_s * (1.0 - mask.value(i, j))
        }))
    }

    /// Row plan for antenna selection. `activation` is the power multiplier
    /// times the per-antenna activation power.
    pub fn rows(mask: &ReliabilityMask, eta: f64, rho_s: f64, activation: f64) -> Self {
        let n = mask.n_tx();
        ThresholdPlan::Rows(DVector::from_fn(n, |i, _| {
            eta * (rho_s * (1.0 - mask.value(i, 0)) + activation)
        }))
    }

    pub fn apply(&self, w: &BeamformingMatrix) -> Result<BeamformingMatrix> {
        match self {
            ThresholdPlan::Elementwise(k) => prox_elementwise(w, k),
            ThresholdPlan::Rows(t) => prox_group_rows(w, t.as_slice()),
        }
    }
}

/// Complex soft threshold: `w * max(1 - kappa / |w|, 0)`.
pub fn soft_threshold_entry(w: Complex64, kappa: f64) -> Complex64 {
    let mag = w.norm();
    if mag <= kappa || mag == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        w * (1.0 - kappa / mag)
    }
}

/// Minimizer of `sum_ij kappa_ij |x_ij| + ||x - W||_F^2 / 2`.
pub fn prox_elementwise(w: &BeamformingMatrix, thresholds: &DMatrix<f64>) -> Result<BeamformingMatrix> {
    if thresholds.shape() != w.shape() {
        return Err(DfrcError::invalid(format!(
            "threshold plan is {:?} but beamformer is {:?}",
            thresholds.shape(),
            w.shape()
        )));
    }
    let out = CMatrix::from_fn(w.nrows(), w.ncols(), |i, j| {
        soft_threshold_entry(w[(i, j)], thresholds[(i, j)])
    });
    Ok(out.into())
}

/// Minimizer of `sum_i tau_i ||x_i||_2 + ||x - W||_F^2 / 2` over rows `x_i`.
pub fn prox_group_rows(w: &BeamformingMatrix, thresholds: &[f64]) -> Result<BeamformingMatrix> {
    if thresholds.len() != w.n_tx() {
        return Err(DfrcError::invalid(format!(
            "{} row thresholds for {} antennas",
            thresholds.len(),
            w.n_tx()
        )));
    }
    if thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(DfrcError::invalid("row thresholds must be nonnegative"));
    }
    let mut out = w.clone().into_matrix();
    for (i, &tau) in thresholds.iter().enumerate() {
        let norm = out.row(i).norm();
        let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
        out.row_mut(i).scale_mut(scale);
    }
    Ok(out.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, stream_rng, Stream};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn soft_threshold_examples() {
        assert!((soft_threshold_entry(c(1.2, 0.0), 0.5) - c(0.7, 0.0)).norm() < 1e-15);
        assert_eq!(soft_threshold_entry(c(0.3, 0.0), 0.5), c(0.0, 0.0));
        assert!((soft_threshold_entry(c(-1.2, 0.0), 0.5) - c(-0.7, 0.0)).norm() < 1e-15);
        let z = soft_threshold_entry(c(0.5, 0.5), 0.20711);
        assert!((z - c(0.35355, 0.35355)).norm() < 1e-5, "{z}");
        assert_eq!(soft_threshold_entry(c(0.0, 0.0), 0.0), c(0.0, 0.0));
    }

    #[test]
    fn soft_threshold_complex_matches_grid_search() {
        // Oracle: brute-force 1-D minimization of kappa|x| + |x - w|^2 / 2 along
        // the ray through w (the minimizer shares w's phase).
        let w = c(0.5, 0.5);
        let kappa = 0.20711;
        let objective = |x: Complex64| kappa * x.norm() + (x - w).norm_sqr() / 2.0;
        let dir = w / w.norm();
        let best = (0..=100_000)
            .map(|k| dir * (k as f64 * 1e-5))
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        assert!((best - c(0.35355, 0.35355)).norm() < 1e-4);
    }

    #[test]
    fn prox_elementwise_examples() {
        let mut rng = stream_rng(1, Stream::InitialBeamformer);
        let w: BeamformingMatrix = complex_gaussian_matrix(&mut rng, 4, 3, 1.0).into();
        assert_eq!(prox_elementwise(&w, &DMatrix::zeros(4, 3)).unwrap(), w);

        let big = w.iter().map(|z| z.norm()).fold(0.0, f64::max) + 1.0;
        let out = prox_elementwise(&w, &DMatrix::from_element(4, 3, big)).unwrap();
        assert_eq!(out.norm(), 0.0);

        let plan = DMatrix::from_fn(4, 3, |i, j| 0.1 * (i + j) as f64);
        let out = prox_elementwise(&w, &plan).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(out[(i, j)], soft_threshold_entry(w[(i, j)], plan[(i, j)]));
            }
        }
        assert!(prox_elementwise(&w, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn prox_rows_examples() {
        let w: BeamformingMatrix = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(4.0, 0.0), c(0.3, 0.0), c(0.4, 0.0)]).into();
        let out = prox_group_rows(&w, &[1.0, 1.0]).unwrap();
        assert!((out[(0, 0)] - c(2.4, 0.0)).norm() < 1e-12);
        assert!((out[(0, 1)] - c(3.2, 0.0)).norm() < 1e-12);
        assert_eq!(out.row(1).norm(), 0.0);
        assert_eq!(prox_group_rows(&w, &[0.0, 0.0]).unwrap(), w);
        assert!(prox_group_rows(&w, &[0.0]).is_err());
        assert!(prox_group_rows(&w, &[-1.0, 0.0]).is_err());

        let zero_row = BeamformingMatrix::zeros(2, 2);
        assert_eq!(prox_group_rows(&zero_row, &[0.0, 1.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn plans_from_masks() {
        let mask = ReliabilityMask::from_rows(&[vec![1.0, 0.5], vec![0.0, 0.25]]).unwrap();
        match ThresholdPlan::elementwise(&mask, 2, 0.1, 2.0) {
            ThresholdPlan::Elementwise(k) => {
                assert_eq!(k[(0, 0)], 0.0);
                assert!((k[(0, 1)] - 0.1).abs() < 1e-15);
                assert!((k[(1, 0)] - 0.2).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        let ant = ReliabilityMask::per_antenna(DVector::from_vec(vec![1.0, 0.5])).unwrap();
        match ThresholdPlan::rows(&ant, 0.1, 2.0, 0.0) {
            ThresholdPlan::Rows(t) => {
                assert_eq!(t[0], 0.0);
                assert!((t[1] - 0.1).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }
}
