//! Performance functionals. All logarithms are base 2: spectral efficiency is
//! in bits/s/Hz and radar mutual information in bits.

use serde::{Deserialize, Serialize};

use crate::scenario::{
    hermitian_part, steering_vector, BeamformingMatrix, CommChannel, RadarCovariance,
    ReliabilityMask, SystemConfig,
};
use crate::{CMatrix, Complex64, DfrcError, Result};

/// Default relative magnitude below which a weight counts as switched off.
pub const DEFAULT_REL_THRESHOLD: f64 = 1e-6;

/// Per-user SINR terms: `|h_m^H w_m|^2` and the interference-plus-noise
/// denominator `D_m`.
#[derive(Debug, Clone)]
pub(crate) struct SinrTerms {
    pub signal: Vec<f64>,
    pub denom: Vec<f64>,
}

impl SinrTerms {
    pub fn compute(h: &CMatrix, w: &CMatrix, sigma2_c: f64) -> Self {
        // gains[(m, j)] = h_m^H w_j
        let gains = h.adjoint() * w;
        let m_users = w.ncols();
        let mut signal = Vec::with_capacity(m_users);
        let mut denom = Vec::with_capacity(m_users);
        for m in 0..m_users {
            let row_power: f64 = (0..m_users).map(|j| gains[(m, j)].norm_sqr()).sum();
            let own = gains[(m, m)].norm_sqr();
            signal.push(own);
            denom.push(row_power - own + sigma2_c);
        }
        SinrTerms { signal, denom }
    }

    pub fn gamma(&self, m: usize) -> f64 {
        self.signal[m] / self.denom[m]
    }

    pub fn se(&self) -> Vec<f64> {
        (0..self.signal.len())
            .map(|m| spectral_efficiency(self.gamma(m)))
            .collect()
    }
}

fn check_channel(channel: &CommChannel, w: &BeamformingMatrix) -> Result<()> {
    if channel.h.shape() != w.shape() {
        return Err(DfrcError::invalid(format!(
            "channel is {:?} but beamformer is {:?}",
            channel.h.shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// SINR of user `m`.
pub fn sinr(channel: &CommChannel, w: &BeamformingMatrix, sigma2_c: f64, m: usize) -> Result<f64> {
    if !(sigma2_c > 0.0) {
        return Err(DfrcError::invalid("communication noise variance must be positive"));
    }
    check_channel(channel, w)?;
    if m >= w.n_users() {
        return Err(DfrcError::invalid(format!("user index {m} out of range")));
    }
    Ok(SinrTerms::compute(&channel.h, w.matrix(), sigma2_c).gamma(m))
}

/// Spectral efficiency of every user, bits/s/Hz.
pub fn spectral_efficiencies(channel: &CommChannel, w: &BeamformingMatrix, sigma2_c: f64) -> Result<Vec<f64>> {
    if !(sigma2_c > 0.0) {
        return Err(DfrcError::invalid("communication noise variance must be positive"));
    }
    check_channel(channel, w)?;
    Ok(SinrTerms::compute(&channel.h, w.matrix(), sigma2_c).se())
}

pub fn spectral_efficiency(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

/// `I + W^H R W / sigma2_r`, symmetrized.
pub(crate) fn mi_inner(r: &CMatrix, w: &CMatrix, sigma2_r: f64) -> CMatrix {
    let m = w.ncols();
    let core = w.adjoint() * r * w / Complex64::from(sigma2_r);
    hermitian_part(&(CMatrix::identity(m, m) + core))
}

pub(crate) fn mi_unchecked(r: &CMatrix, w: &CMatrix, sigma2_r: f64) -> f64 {
    let inner = mi_inner(r, w, sigma2_r);
    inner
        .symmetric_eigenvalues()
        .iter()
        .map(|&ev| ev.max(f64::MIN_POSITIVE).log2())
        .sum()
}

/// Radar mutual information `log2 det(I_M + W^H R W / sigma2_r)`, bits.
pub fn radar_mi(r: &RadarCovariance, w: &BeamformingMatrix, sigma2_r: f64) -> Result<f64> {
    if !(sigma2_r > 0.0) {
        return Err(DfrcError::invalid("radar noise variance must be positive"));
    }
    if r.dim() != w.n_tx() {
        return Err(DfrcError::invalid("covariance does not match transmit dimension"));
    }
    Ok(mi_unchecked(r.matrix(), w.matrix(), sigma2_r).max(0.0))
}

/// `W` with each weight scaled by its health value.
pub fn apply_mask(w: &BeamformingMatrix, mask: &ReliabilityMask) -> Result<BeamformingMatrix> {
    mask.check_dims(w.n_tx(), w.n_users())?;
    let masked = CMatrix::from_fn(w.n_tx(), w.n_users(), |i, j| w[(i, j)] * mask.value(i, j));
    Ok(masked.into())
}

/// Transmitted power versus angle, `p(theta) = sum_j |a(theta)^H w_j|^2`,
/// optionally through a reliability mask.
pub fn beampattern(
    w: &BeamformingMatrix,
    theta_grid: &[f64],
    spacing: f64,
    wavelength: f64,
    mask: Option<&ReliabilityMask>,
) -> Result<Vec<f64>> {
    if theta_grid.is_empty() {
        return Err(DfrcError::invalid("beampattern grid is empty"));
    }
    let effective = match mask {
        Some(mask) => apply_mask(w, mask)?,
        None => w.clone(),
    };
    theta_grid
        .iter()
        .map(|&theta| {
            let a = steering_vector(theta, w.n_tx(), spacing, wavelength)?;
            let proj = a.adjoint() * effective.matrix();
            Ok(proj.iter().map(|z| z.norm_sqr()).sum())
        })
        .collect()
}

/// Percentage of weights whose magnitude exceeds `rel_threshold * max|w|`.
/// Zero for an all-zero matrix.
pub fn density_pct(w: &BeamformingMatrix, rel_threshold: f64) -> f64 {
    let max = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let cut = rel_threshold * max;
    let active = w.iter().filter(|z| z.norm() > cut).count();
    100.0 * active as f64 / w.len() as f64
}

/// Mean health over the active support of `W`, in percent. Per-entry masks
/// average over active entries; per-antenna masks over active rows.
pub fn reliability_pct(w: &BeamformingMatrix, mask: &ReliabilityMask, rel_threshold: f64) -> Result<f64> {
    mask.check_dims(w.n_tx(), w.n_users())?;
    let (sum, count) = match mask {
        ReliabilityMask::PerEntry(beta) => {
            let max = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let cut = rel_threshold * max;
            w.iter()
                .zip(beta.iter())
                .filter(|(z, _)| max > 0.0 && z.norm() > cut)
                .fold((0.0, 0usize), |(s, n), (_, b)| (s + b, n + 1))
        }
        ReliabilityMask::PerAntenna(beta) => {
            let norms: Vec<f64> = (0..w.n_tx()).map(|i| w.row_norm(i)).collect();
            let max = norms.iter().cloned().fold(0.0, f64::max);
            let cut = rel_threshold * max;
            norms
                .iter()
                .zip(beta.iter())
                .filter(|(n, _)| max > 0.0 && **n > cut)
                .fold((0.0, 0usize), |(s, n), (_, b)| (s + b, n + 1))
        }
    };
    Ok(if count == 0 { 0.0 } else { 100.0 * sum / count as f64 })
}

/// Antennas (rows) carrying any weight above the relative threshold.
pub fn active_antennas(w: &BeamformingMatrix, rel_threshold: f64) -> Vec<usize> {
    let norms: Vec<f64> = (0..w.n_tx()).map(|i| w.row_norm(i)).collect();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    (0..norms.len()).filter(|&i| norms[i] > rel_threshold * max).collect()
}

/// `trace(W W^H)`.
pub fn tx_power(w: &BeamformingMatrix) -> f64 {
    w.norm_squared()
}

/// One solution's reporting metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub rho_s: f64,
    /// bits/s/Hz
    pub se_per_user: Vec<f64>,
    /// bits/s
    pub rate_per_user: Vec<f64>,
    /// bits
    pub radar_mi: f64,
    pub density_pct: f64,
    pub reliability_pct: f64,
    pub tx_power: f64,
}

impl MetricsRecord {
    pub fn evaluate(
        config: &SystemConfig,
        r: &RadarCovariance,
        channel: &CommChannel,
        w: &BeamformingMatrix,
        mask: &ReliabilityMask,
        rho_s: f64,
    ) -> Result<Self> {
        let se_per_user = spectral_efficiencies(channel, w, config.sigma2_c)?;
        let rate_per_user = se_per_user
            .iter()
            .enumerate()
            .map(|(j, se)| se * config.user_bandwidth(j))
            .collect();
        Ok(MetricsRecord {
            rho_s,
            se_per_user,
            rate_per_user,
            radar_mi: radar_mi(r, w, config.sigma2_r)?,
            density_pct: density_pct(w, DEFAULT_REL_THRESHOLD),
            reliability_pct: reliability_pct(w, mask, DEFAULT_REL_THRESHOLD)?,
            tx_power: tx_power(w),
        })
    }

    pub fn mean_se(&self) -> f64 {
        mean(&self.se_per_user)
    }

    pub fn mean_rate(&self) -> f64 {
        mean(&self.rate_per_user)
    }

    pub fn csv_header(n_users: usize) -> Vec<String> {
        let mut h = vec!["rho_s".to_string()];
        h.extend((1..=n_users).map(|j| format!("se_{j}")));
        h.extend((1..=n_users).map(|j| format!("rate_{j}")));
        h.extend(["radar_mi", "density_pct", "power", "reliability_pct"].map(String::from));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![self.rho_s.to_string()];
        row.extend(self.se_per_user.iter().map(f64::to_string));
        row.extend(self.rate_per_user.iter().map(f64::to_string));
        row.extend(
            [self.radar_mi, self.density_pct, self.tx_power, self.reliability_pct].map(|v| v.to_string()),
        );
        row
    }

    /// Parses a row written by [`Self::csv_row`].
    pub fn from_csv_row(row: &[String], n_users: usize) -> Result<Self> {
        let want = 1 + 2 * n_users + 4;
        if row.len() != want {
            return Err(DfrcError::invalid(format!(
                "metrics row has {} fields, expected {want}",
                row.len()
            )));
        }
        let v: Vec<f64> = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| DfrcError::invalid(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let m = n_users;
        Ok(MetricsRecord {
            rho_s: v[0],
            se_per_user: v[1..1 + m].to_vec(),
            rate_per_user: v[1 + m..1 + 2 * m].to_vec(),
            radar_mi: v[1 + 2 * m],
            density_pct: v[2 + 2 * m],
            tx_power: v[3 + 2 * m],
            reliability_pct: v[4 + 2 * m],
        })
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, stream_rng, Stream};
    use crate::scenario::{radar_covariance, RadarScene};
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn chan(cols: &[&[f64]]) -> CommChannel {
        let n = cols[0].len();
        CommChannel::new(CMatrix::from_fn(n, cols.len(), |i, j| c(cols[j][i]))).unwrap()
    }

    fn bf(cols: &[&[f64]]) -> BeamformingMatrix {
        let n = cols[0].len();
        CMatrix::from_fn(n, cols.len(), |i, j| c(cols[j][i])).into()
    }

    #[test]
    fn sinr_examples() {
        let h = chan(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let w = bf(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((sinr(&h, &w, 1.0, 0).unwrap() - 1.0).abs() < 1e-15);
        let w = bf(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert!((sinr(&h, &w, 1.0, 0).unwrap() - 0.5).abs() < 1e-15);
        let w = BeamformingMatrix::zeros(2, 2);
        assert_eq!(sinr(&h, &w, 1.0, 1).unwrap(), 0.0);
        assert!(sinr(&h, &w, 0.0, 0).is_err());
        assert!(sinr(&h, &w, 1.0, 2).is_err());
    }

    #[test]
    fn sinr_single_user_and_phase_invariance() {
        let mut rng = stream_rng(4, Stream::Channel);
        let h = CommChannel::new(complex_gaussian_matrix(&mut rng, 5, 1, 1.0)).unwrap();
        let w: BeamformingMatrix = complex_gaussian_matrix(&mut rng, 5, 1, 1.0).into();
        let direct = (h.h.adjoint() * w.matrix())[(0, 0)].norm_sqr() / 0.3;
        assert!((sinr(&h, &w, 0.3, 0).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));

        let h = CommChannel::new(complex_gaussian_matrix(&mut rng, 5, 3, 1.0)).unwrap();
        let w: BeamformingMatrix = complex_gaussian_matrix(&mut rng, 5, 3, 1.0).into();
        let mut rotated = w.clone().into_matrix();
        let phase = Complex64::from_polar(1.0, 1.234);
        for i in 0..5 {
            rotated[(i, 1)] *= phase;
        }
        let rotated: BeamformingMatrix = rotated.into();
        for m in 0..3 {
            let a = sinr(&h, &w, 0.1, m).unwrap();
            let b = sinr(&h, &rotated, 0.1, m).unwrap();
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn se_examples() {
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert!((spectral_efficiency(1.0) - 1.0).abs() < 1e-15);
        assert!((spectral_efficiency(3.0) - 2.0).abs() < 1e-15);
    }

    fn cov(m: CMatrix) -> RadarCovariance {
        RadarCovariance::new(m).unwrap()
    }

    #[test]
    fn mi_examples() {
        let r = cov(CMatrix::identity(2, 2));
        let w: BeamformingMatrix = CMatrix::identity(2, 2).into();
        assert!((radar_mi(&r, &w, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(radar_mi(&r, &BeamformingMatrix::zeros(2, 2), 1.0).unwrap(), 0.0);

        let r = cov(CMatrix::from_element(1, 1, c(2.0)));
        let w: BeamformingMatrix = CMatrix::from_element(1, 1, c(1.0)).into();
        assert!((radar_mi(&r, &w, 0.5).unwrap() - 5f64.log2()).abs() < 1e-12);
        assert!(radar_mi(&r, &w, 0.0).is_err());
    }

    #[test]
    fn mi_matches_transmit_side_determinant() {
        // log2 det(I_Nt + R W W^H / s2) through an LU determinant.
        let mut rng = stream_rng(8, Stream::Scene);
        let scene = RadarScene::random(&mut rng, 3);
        let r = radar_covariance(&scene, 6, 0.5, 1.0).unwrap();
        let w: BeamformingMatrix = complex_gaussian_matrix(&mut rng, 6, 2, 1.0).into();
        let big = CMatrix::identity(6, 6) + r.matrix() * w.matrix() * w.adjoint() / c(0.2);
        let want = big.determinant().re.log2();
        let got = radar_mi(&r, &w, 0.2).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn mi_unitary_invariance_and_monotone_in_power() {
        let mut rng = stream_rng(12, Stream::Scene);
        let scene = RadarScene::random(&mut rng, 2);
        let r = radar_covariance(&scene, 4, 0.5, 1.0).unwrap();
        let w0 = complex_gaussian_matrix(&mut rng, 4, 3, 1.0);
        // Unitary from the QR factor of a random complex matrix.
        let u = complex_gaussian_matrix(&mut rng, 4, 4, 1.0).qr().q();
        let r_rot = cov(&u * r.matrix() * u.adjoint());
        let a = radar_mi(&r, &w0.clone().into(), 0.1).unwrap();
        let b = radar_mi(&r_rot, &(&u * &w0).into(), 0.1).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");

        let mut last = -1.0;
        for p in [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let w: BeamformingMatrix = (&w0 * c(f64::sqrt(p))).into();
            let mi = radar_mi(&r, &w, 0.1).unwrap();
            assert!(mi >= last);
            last = mi;
        }
    }

    #[test]
    fn beampattern_examples() {
        let n = 10;
        let theta0 = 0.3;
        let a = steering_vector(theta0, n, 0.5, 1.0).unwrap();
        let w: BeamformingMatrix = CMatrix::from_column_slice(n, 1, a.as_slice()).into();
        let p = beampattern(&w, &[theta0], 0.5, 1.0, None).unwrap();
        assert!((p[0] - 100.0).abs() < 1e-9);

        let grid: Vec<f64> = (0..=180).map(|d| (d as f64 - 90.0) * PI / 180.0).collect();
        let zero = ReliabilityMask::per_antenna(DVector::zeros(n)).unwrap();
        assert!(beampattern(&w, &grid, 0.5, 1.0, Some(&zero)).unwrap().iter().all(|v| *v == 0.0));
        let ones = ReliabilityMask::per_antenna(DVector::from_element(n, 1.0)).unwrap();
        assert_eq!(
            beampattern(&w, &grid, 0.5, 1.0, Some(&ones)).unwrap(),
            beampattern(&w, &grid, 0.5, 1.0, None).unwrap()
        );
        assert!(beampattern(&w, &[], 0.5, 1.0, None).is_err());
    }

    #[test]
    fn density_examples() {
        let w: BeamformingMatrix = CMatrix::from_element(3, 2, c(0.7)).into();
        assert_eq!(density_pct(&w, DEFAULT_REL_THRESHOLD), 100.0);
        let mut m = CMatrix::zeros(5, 2);
        m[(0, 0)] = c(1.0);
        m[(3, 1)] = c(-0.5);
        m[(4, 1)] = Complex64::new(0.0, 0.2);
        assert!((density_pct(&m.into(), DEFAULT_REL_THRESHOLD) - 30.0).abs() < 1e-12);
        assert_eq!(density_pct(&BeamformingMatrix::zeros(2, 2), DEFAULT_REL_THRESHOLD), 0.0);
    }

    #[test]
    fn reliability_examples() {
        let beta = ReliabilityMask::per_antenna(DVector::from_vec(vec![1.0, 0.5, 0.0])).unwrap();
        let w = bf(&[&[1.0, 2.0, 0.0]]);
        assert!((reliability_pct(&w, &beta, DEFAULT_REL_THRESHOLD).unwrap() - 75.0).abs() < 1e-12);

        let uniform = ReliabilityMask::per_entry(DMatrix::from_element(3, 2, 0.52)).unwrap();
        let full: BeamformingMatrix = CMatrix::from_element(3, 2, c(1.0)).into();
        assert!((reliability_pct(&full, &uniform, DEFAULT_REL_THRESHOLD).unwrap() - 52.0).abs() < 1e-9);

        let mixed = ReliabilityMask::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        let diag = bf(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(reliability_pct(&diag, &mixed, DEFAULT_REL_THRESHOLD).unwrap(), 100.0);

        assert_eq!(
            reliability_pct(&BeamformingMatrix::zeros(3, 2), &uniform, DEFAULT_REL_THRESHOLD).unwrap(),
            0.0
        );
        assert!(reliability_pct(&diag, &uniform, DEFAULT_REL_THRESHOLD).is_err());
    }

    #[test]
    fn power_examples() {
        let w: BeamformingMatrix = CMatrix::identity(2, 2).into();
        assert_eq!(tx_power(&w), 2.0);
        assert_eq!(tx_power(&BeamformingMatrix::zeros(3, 3)), 0.0);
        let mut rng = stream_rng(1, Stream::InitialBeamformer);
        let w0 = complex_gaussian_matrix(&mut rng, 4, 3, 1.0);
        let k = Complex64::new(0.6, -1.1);
        let scaled: BeamformingMatrix = (&w0 * k).into();
        let base = tx_power(&w0.into());
        assert!((tx_power(&scaled) - k.norm_sqr() * base).abs() < 1e-12 * base);
    }

    #[test]
    fn record_rate_is_se_times_bandwidth_and_row_round_trips() {
        let cfg = SystemConfig::mmwave_28ghz();
        let mut rng = stream_rng(2, Stream::Channel);
        let scene = RadarScene::random(&mut rng, 4);
        let r = radar_covariance(&scene, 10, cfg.spacing, cfg.wavelength).unwrap();
        let chan = crate::scenario::sample_channel(&mut rng, 10, 4);
        let w = BeamformingMatrix::random_with_power(&mut rng, 10, 4, 1.0);
        let mask = ReliabilityMask::random_per_entry(&mut rng, 10, 4, 0.0);
        let rec = MetricsRecord::evaluate(&cfg, &r, &chan, &w, &mask, 0.5).unwrap();
        for j in 0..4 {
            assert!((rec.rate_per_user[j] - rec.se_per_user[j] * cfg.user_bandwidth(j)).abs() < 1e-3);
        }
        assert!(rec.radar_mi >= 0.0);
        assert_eq!(MetricsRecord::csv_header(4).len(), rec.csv_row().len());
        assert_eq!(MetricsRecord::from_csv_row(&rec.csv_row(), 4).unwrap(), rec);
    }
}
