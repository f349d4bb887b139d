//! Scenario data model and the physical signal model.
//!
//! Conventions: `W` is `N_t x M` (column `j` is user `j`'s beamformer, row `i`
//! is antenna `i`'s weights across users); `H` is `N_t x M` (column `j` is user
//! `j`'s channel); the target response `G` is `N_r x N_t`.

use std::f64::consts::PI;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{complex_gaussian, complex_gaussian_matrix};
use crate::{CMatrix, CVector, Complex64, DfrcError, Result};

/// Carrier wavelength at 28 GHz, meters.
pub const WAVELENGTH_28GHZ: f64 = 299_792_458.0 / 28.0e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_users: usize,
    pub n_targets: usize,
    pub frame_len: usize,
    /// Meters.
    pub wavelength: f64,
    /// Element spacing, meters.
    pub spacing: f64,
    pub sigma2_c: f64,
    pub sigma2_r: f64,
    /// Transmit power budget `P_t` in normalized units.
    pub power_budget: f64,
    /// Hz.
    pub total_bandwidth: f64,
    /// Radar share of the band; also the radar objective weight.
    pub bw_fraction_radar: f64,
    /// Per-user share of the band; also the per-user objective weights.
    pub bw_fractions_users: Vec<f64>,
    /// Minimum spectral efficiency per user, bits/s/Hz.
    pub rate_min: Vec<f64>,
    /// Maximum spectral efficiency per user, bits/s/Hz.
    pub rate_max: Vec<f64>,
    pub sparsity_weight: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::mmwave_28ghz()
    }
}

impl SystemConfig {
    /// The 28 GHz reference scenario: 10 co-located transmit/receive elements,
    /// 4 users, 4 targets, noise variance 0.1 on both links, unit power budget,
    /// a 28 GHz band split between radar and users, 100 Mb/s minimum and
    /// 20 Gb/s maximum per-user rates.
    pub fn mmwave_28ghz() -> Self {
        let total_bandwidth = 28.0e9;
        let bw_fractions_users = vec![0.2032, 0.2744, 0.2719, 0.2357];
        let rate_max = bw_fractions_users
            .iter()
            .map(|f| 20.0e9 / (f * total_bandwidth))
            .collect();
        SystemConfig {
            n_tx: 10,
            n_rx: 10,
            n_users: 4,
            n_targets: 4,
            frame_len: 10,
            wavelength: WAVELENGTH_28GHZ,
            spacing: WAVELENGTH_28GHZ / 2.0,
            sigma2_c: 0.1,
            sigma2_r: 0.1,
            power_budget: 1.0,
            total_bandwidth,
            bw_fraction_radar: 0.0148,
            bw_fractions_users,
            rate_min: vec![0.0176, 0.0130, 0.0131, 0.0152],
            rate_max,
            sparsity_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_users;
        if self.n_tx == 0 || self.n_rx == 0 || m == 0 || self.frame_len == 0 {
            return Err(DfrcError::invalid(
                "n_tx, n_rx, n_users and frame_len must be positive",
            ));
        }
        if self.frame_len < self.n_tx {
            return Err(DfrcError::invalid(format!(
                "frame_len {} shorter than n_tx {}",
                self.frame_len, self.n_tx
            )));
        }
        if !(self.wavelength > 0.0) || !(self.spacing > 0.0) {
            return Err(DfrcError::invalid("wavelength and spacing must be positive"));
        }
        if !(self.sigma2_c > 0.0) || !(self.sigma2_r > 0.0) {
            return Err(DfrcError::invalid("noise variances must be positive"));
        }
        if !(self.power_budget > 0.0) || !(self.total_bandwidth > 0.0) {
            return Err(DfrcError::invalid(
                "power_budget and total_bandwidth must be positive",
            ));
        }
        for (name, v) in [
            ("bw_fractions_users", &self.bw_fractions_users),
            ("rate_min", &self.rate_min),
            ("rate_max", &self.rate_max),
        ] {
            if v.len() != m {
                return Err(DfrcError::invalid(format!(
                    "{name} has {} entries, expected n_users = {m}",
                    v.len()
                )));
            }
        }
        if !(self.bw_fraction_radar > 0.0 && self.bw_fraction_radar < 1.0)
            || self.bw_fractions_users.iter().any(|&f| !(f > 0.0))
        {
            return Err(DfrcError::invalid("bandwidth fractions must be strictly positive"));
        }
        let total: f64 = self.bw_fraction_radar + self.bw_fractions_users.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DfrcError::invalid(format!(
                "bandwidth fractions sum to {total}, expected 1"
            )));
        }
        for (j, (lo, hi)) in self.rate_min.iter().zip(&self.rate_max).enumerate() {
            if !(lo < hi) {
                return Err(DfrcError::invalid(format!(
                    "user {j}: rate_min {lo} not below rate_max {hi}"
                )));
            }
        }
        if !(self.sparsity_weight >= 0.0) {
            return Err(DfrcError::invalid("sparsity_weight must be nonnegative"));
        }
        Ok(())
    }

    /// Bandwidth allocated to user `j`, Hz.
    pub fn user_bandwidth(&self, j: usize) -> f64 {
        self.bw_fractions_users[j] * self.total_bandwidth
    }

    /// Converts a rate in bits/s for user `j` to bits/s/Hz.
    pub fn rate_to_se(&self, j: usize, rate_bps: f64) -> f64 {
        rate_bps / self.user_bandwidth(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    PerEntry,
    PerAntenna,
}

/// Health values in `[0, 1]`: 0 is a failed or switched-off element, 1 fully
/// operational.
#[derive(Debug, Clone, PartialEq)]
pub enum ReliabilityMask {
    /// `N_t x M`, one value per antenna/RF-chain connection.
    PerEntry(DMatrix<f64>),
    /// Length `N_t`, one value per antenna element.
    PerAntenna(DVector<f64>),
}

impl ReliabilityMask {
    pub fn per_entry(values: DMatrix<f64>) -> Result<Self> {
        check_unit_interval(values.iter())?;
        Ok(ReliabilityMask::PerEntry(values))
    }

    pub fn per_antenna(values: DVector<f64>) -> Result<Self> {
        check_unit_interval(values.iter())?;
        Ok(ReliabilityMask::PerAntenna(values))
    }

    /// Builds a per-entry mask from rows (antennas) of per-user values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(DfrcError::invalid("mask rows must be nonempty and equal length"));
        }
        Self::per_entry(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn kind(&self) -> MaskKind {
        match self {
            ReliabilityMask::PerEntry(_) => MaskKind::PerEntry,
            ReliabilityMask::PerAntenna(_) => MaskKind::PerAntenna,
        }
    }

    pub fn n_tx(&self) -> usize {
        match self {
            ReliabilityMask::PerEntry(b) => b.nrows(),
            ReliabilityMask::PerAntenna(b) => b.len(),
        }
    }

    /// Health of the connection (antenna `i`, user `j`).
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match self {
            ReliabilityMask::PerEntry(b) => b[(i, j)],
            ReliabilityMask::PerAntenna(b) => b[i],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ReliabilityMask::PerEntry(b) => b.mean(),
            ReliabilityMask::PerAntenna(b) => b.mean(),
        }
    }

    pub fn check_dims(&self, n_tx: usize, n_users: usize) -> Result<()> {
        let ok = match self {
            ReliabilityMask::PerEntry(b) => b.nrows() == n_tx && b.ncols() == n_users,
            ReliabilityMask::PerAntenna(b) => b.len() == n_tx,
        };
        if ok {
            Ok(())
        } else {
            Err(DfrcError::invalid(format!(
                "{:?} mask does not match a {n_tx}x{n_users} beamformer",
                self.kind()
            )))
        }
    }

    /// All-healthy mask of the given kind.
    pub fn healthy(kind: MaskKind, n_tx: usize, n_users: usize) -> Self {
        match kind {
            MaskKind::PerEntry => ReliabilityMask::PerEntry(DMatrix::from_element(n_tx, n_users, 1.0)),
            MaskKind::PerAntenna => ReliabilityMask::PerAntenna(DVector::from_element(n_tx, 1.0)),
        }
    }

    /// Random per-entry mask: entries uniform on `[0, 1]`, then a
    /// `clamp_fraction` of them (chosen at random) snapped to the nearer of 0 or 1.
    pub fn random_per_entry<R: Rng + ?Sized>(
        rng: &mut R,
        n_tx: usize,
        n_users: usize,
        clamp_fraction: f64,
    ) -> Self {
        let mut values: Vec<f64> = (0..n_tx * n_users).map(|_| rng.random::<f64>()).collect();
        clamp_some(rng, &mut values, clamp_fraction);
        ReliabilityMask::PerEntry(DMatrix::from_vec(n_tx, n_users, values))
    }

    /// Random per-antenna mask, same recipe as [`Self::random_per_entry`].
    pub fn random_per_antenna<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, clamp_fraction: f64) -> Self {
        let mut values: Vec<f64> = (0..n_tx).map(|_| rng.random::<f64>()).collect();
        clamp_some(rng, &mut values, clamp_fraction);
        ReliabilityMask::PerAntenna(DVector::from_vec(values))
    }
}

fn clamp_some<R: Rng + ?Sized>(rng: &mut R, values: &mut [f64], fraction: f64) {
    let n_clamp = ((fraction.clamp(0.0, 1.0)) * values.len() as f64).round() as usize;
    let picked = rand::seq::index::sample(rng, values.len(), n_clamp);
    for idx in picked {
        values[idx] = values[idx].round();
    }
}

fn check_unit_interval<'a>(mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(DfrcError::invalid("reliability values must lie in [0, 1]"))
    }
}

/// Point targets seen by the co-located radar.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScene {
    /// Radians, in `(-pi/2, pi/2)`.
    pub angles: Vec<f64>,
    /// Expected strength `E|alpha_k|^2`.
    pub strengths: Vec<f64>,
    /// Two-way channel gain times RCS.
    pub amplitudes: Vec<Complex64>,
}

impl RadarScene {
    pub fn new(angles: Vec<f64>, strengths: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if angles.len() != strengths.len() || angles.len() != amplitudes.len() {
            return Err(DfrcError::invalid("scene vectors must have equal length"));
        }
        if angles.iter().any(|a| !(a.abs() < PI / 2.0)) {
            return Err(DfrcError::invalid("target angles must lie in (-pi/2, pi/2)"));
        }
        if strengths.iter().any(|s| !(*s >= 0.0)) {
            return Err(DfrcError::invalid("target strengths must be nonnegative"));
        }
        Ok(RadarScene {
            angles,
            strengths,
            amplitudes,
        })
    }

    /// Default random scene: angles uniform on `(-pi/3, pi/3)`, unit expected
    /// strength, CN(0, 1) amplitudes.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_targets: usize) -> Self {
        let angles = (0..n_targets)
            .map(|_| rng.random_range(-PI / 3.0..PI / 3.0))
            .collect();
        let amplitudes = (0..n_targets).map(|_| complex_gaussian(rng, 1.0)).collect();
        RadarScene {
            angles,
            strengths: vec![1.0; n_targets],
            amplitudes,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.angles.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommChannel {
    /// `N_t x M`; column `j` is `h_j`.
    pub h: CMatrix,
}

impl CommChannel {
    pub fn new(h: CMatrix) -> Result<Self> {
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DfrcError::invalid("channel entries must be finite"));
        }
        Ok(CommChannel { h })
    }

    pub fn n_tx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }
}

/// `N_t x M` beamforming matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix(CMatrix);

impl BeamformingMatrix {
    pub fn new(w: CMatrix) -> Self {
        BeamformingMatrix(w)
    }

    pub fn zeros(n_tx: usize, n_users: usize) -> Self {
        BeamformingMatrix(CMatrix::zeros(n_tx, n_users))
    }

    pub fn n_tx(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Euclidean norm of antenna `i`'s weights across users.
    pub fn row_norm(&self, i: usize) -> f64 {
        self.0.row(i).norm()
    }

    /// Random initial point: i.i.d. CN(0, 1) entries rescaled to the given
    /// transmit power.
    pub fn random_with_power<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, n_users: usize, power: f64) -> Self {
        let w = complex_gaussian_matrix(rng, n_tx, n_users, 1.0);
        let scale = (power / w.norm_squared()).sqrt();
        BeamformingMatrix(w * Complex64::from(scale))
    }
}

impl Deref for BeamformingMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl From<CMatrix> for BeamformingMatrix {
    fn from(w: CMatrix) -> Self {
        BeamformingMatrix(w)
    }
}

/// Uniform linear array response toward `theta`:
/// element `m` is `exp(j 2 pi d m sin(theta) / lambda)`.
pub fn steering_vector(theta: f64, n: usize, spacing: f64, wavelength: f64) -> Result<CVector> {
    if n == 0 {
        return Err(DfrcError::invalid("steering vector needs at least one element"));
    }
    if !(wavelength > 0.0) {
        return Err(DfrcError::invalid("wavelength must be positive"));
    }
    let phase = 2.0 * PI / wavelength * spacing * theta.sin();
    Ok(CVector::from_fn(n, |m, _| Complex64::from_polar(1.0, phase * m as f64)))
}

/// Target response `G = sum_k alpha_k b(theta_k) a(theta_k)^H`, `N_r x N_t`.
pub fn target_response(
    scene: &RadarScene,
    n_tx: usize,
    n_rx: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<CMatrix> {
    if scene.angles.len() != scene.amplitudes.len() {
        return Err(DfrcError::invalid("scene angles and amplitudes differ in length"));
    }
    let mut g = CMatrix::zeros(n_rx, n_tx);
    for (&theta, &alpha) in scene.angles.iter().zip(&scene.amplitudes) {
        let a = steering_vector(theta, n_tx, spacing, wavelength)?;
        let b = steering_vector(theta, n_rx, spacing, wavelength)?;
        g += (b * a.adjoint()) * alpha;
    }
    Ok(g)
}

/// Validated transmit-side radar covariance: Hermitian, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCovariance(CMatrix);

impl RadarCovariance {
    /// Hermitian tolerance relative to the largest entry.
    const HERMITIAN_TOL: f64 = 1e-9;
    /// Smallest eigenvalue accepted as PSD.
    const PSD_TOL: f64 = -1e-8;

    pub fn new(r: CMatrix) -> Result<Self> {
        if !r.is_square() {
            return Err(DfrcError::invalid("covariance must be square"));
        }
        let scale = r.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if (&r - r.adjoint()).iter().any(|z| z.norm() > Self::HERMITIAN_TOL * scale) {
            return Err(DfrcError::invalid("covariance is not Hermitian"));
        }
        let sym = hermitian_part(&r);
        let min_eig = sym
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < Self::PSD_TOL {
            return Err(DfrcError::invalid(format!(
                "covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(RadarCovariance(sym))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// `(A + A^H) / 2`.
pub(crate) fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::from(0.5)
}

/// `R = sum_k sigma_k^2 a(theta_k) a(theta_k)^H`, `N_t x N_t`.
pub fn radar_covariance(
    scene: &RadarScene,
    n_tx: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<RadarCovariance> {
    if scene.strengths.iter().any(|s| !(*s >= 0.0)) {
        return Err(DfrcError::invalid("target strengths must be nonnegative"));
    }
    if scene.angles.len() != scene.strengths.len() {
        return Err(DfrcError::invalid("scene angles and strengths differ in length"));
    }
    let mut r = CMatrix::zeros(n_tx, n_tx);
    for (&theta, &s2) in scene.angles.iter().zip(&scene.strengths) {
        let a = steering_vector(theta, n_tx, spacing, wavelength)?;
        r += (&a * a.adjoint()) * Complex64::from(s2);
    }
    RadarCovariance::new(r)
}

/// I.i.d. CN(0, 1) channel scaled by `1 / sqrt(N_t)`.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, n_users: usize) -> CommChannel {
    let h = complex_gaussian_matrix(rng, n_tx, n_users, 1.0) / Complex64::from((n_tx as f64).sqrt());
    CommChannel { h }
}

/// `M x L` matrix of i.i.d. CN(0, 1) symbols.
pub fn sample_symbols<R: Rng + ?Sized>(rng: &mut R, n_users: usize, frame_len: usize) -> Result<CMatrix> {
    if frame_len < n_users {
        return Err(DfrcError::invalid(format!(
            "frame length {frame_len} shorter than stream count {n_users}"
        )));
    }
    Ok(complex_gaussian_matrix(rng, n_users, frame_len, 1.0))
}

fn check_product(w: &BeamformingMatrix, symbols: &CMatrix) -> Result<CMatrix> {
    if w.n_users() != symbols.nrows() {
        return Err(DfrcError::invalid(format!(
            "beamformer has {} columns but symbol matrix has {} rows",
            w.n_users(),
            symbols.nrows()
        )));
    }
    Ok(w.matrix() * symbols)
}

/// Radar echo `G W S + Omega`, noise entries CN(0, sigma2_r).
pub fn synthesize_radar_rx<R: Rng + ?Sized>(
    g: &CMatrix,
    w: &BeamformingMatrix,
    symbols: &CMatrix,
    sigma2_r: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    let x = check_product(w, symbols)?;
    if g.ncols() != x.nrows() {
        return Err(DfrcError::invalid("target response does not match transmit dimension"));
    }
    let y = g * x;
    let noise = complex_gaussian_matrix(rng, y.nrows(), y.ncols(), sigma2_r);
    Ok(y + noise)
}

/// Received user signals `H^H W S + N`, noise entries CN(0, sigma2_c).
pub fn synthesize_comm_rx<R: Rng + ?Sized>(
    channel: &CommChannel,
    w: &BeamformingMatrix,
    symbols: &CMatrix,
    sigma2_c: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    let x = check_product(w, symbols)?;
    if channel.n_tx() != x.nrows() {
        return Err(DfrcError::invalid("channel does not match transmit dimension"));
    }
    let y = channel.h.adjoint() * x;
    let noise = complex_gaussian_matrix(rng, y.nrows(), y.ncols(), sigma2_c);
    Ok(y + noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    const LAM: f64 = 1.0;
    const D: f64 = 0.5;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_cvec(got: &CVector, want: &[Complex64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < tol, "{g} vs {w}");
        }
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = steering_vector(0.0, 4, D, LAM).unwrap();
        assert_cvec(&a, &[c(1.0, 0.0); 4], 1e-15);
    }

    #[test]
    fn steering_endfire_alternates() {
        let a = steering_vector(PI / 2.0, 2, D, LAM).unwrap();
        assert_cvec(&a, &[c(1.0, 0.0), c(-1.0, 0.0)], 1e-12);
    }

    #[test]
    fn steering_thirty_degrees() {
        let a = steering_vector(PI / 6.0, 3, D, LAM).unwrap();
        assert_cvec(&a, &[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)], 1e-12);
    }

    #[test]
    fn steering_rejects_bad_arguments() {
        assert!(steering_vector(0.0, 0, D, LAM).is_err());
        assert!(steering_vector(0.0, 3, D, 0.0).is_err());
        assert!(steering_vector(0.0, 3, D, -1.0).is_err());
    }

    // Struct literal: the endfire example sits on the boundary `new` rejects.
    fn scene(angles: &[f64], amps: &[f64]) -> RadarScene {
        RadarScene {
            angles: angles.to_vec(),
            strengths: vec![1.0; angles.len()],
            amplitudes: amps.iter().map(|&a| c(a, 0.0)).collect(),
        }
    }

    #[test]
    fn target_response_single_broadside() {
        let g = target_response(&scene(&[0.0], &[1.0]), 2, 2, D, LAM).unwrap();
        assert!(g.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));

        let g = target_response(&scene(&[0.0], &[2.0]), 3, 2, D, LAM).unwrap();
        assert_eq!(g.shape(), (2, 3));
        assert!(g.iter().all(|z| (z - c(2.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn target_response_is_linear_in_targets() {
        let one = target_response(&scene(&[0.0], &[1.0]), 2, 2, D, LAM).unwrap();
        let two = target_response(&scene(&[0.0, 0.0], &[1.0, 1.0]), 2, 2, D, LAM).unwrap();
        assert_eq!(two, &one * c(2.0, 0.0));
    }

    #[test]
    fn covariance_examples() {
        let r = radar_covariance(&scene(&[0.0], &[1.0]), 3, D, LAM).unwrap();
        assert!(r.matrix().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));

        let zero = RadarScene::new(vec![0.3], vec![0.0], vec![c(1.0, 0.0)]).unwrap();
        let r = radar_covariance(&zero, 3, D, LAM).unwrap();
        assert!(r.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn covariance_two_targets_matches_direct_sum() {
        // Oracle: a(0) = [1, 1], a(pi/2) = [1, -1]; sum of outer products by hand.
        let a0 = [c(1.0, 0.0), c(1.0, 0.0)];
        let a1 = [c(1.0, 0.0), c(-1.0, 0.0)];
        let mut want = [[c(0.0, 0.0); 2]; 2];
        for a in [a0, a1] {
            for i in 0..2 {
                for j in 0..2 {
                    want[i][j] += a[i] * a[j].conj();
                }
            }
        }
        assert_eq!(want[0][0], c(2.0, 0.0));
        assert_eq!(want[0][1], c(0.0, 0.0));
        let r = radar_covariance(&scene(&[0.0, PI / 2.0], &[1.0, 1.0]), 2, D, LAM).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.matrix()[(i, j)] - want[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_rejects_negative_strength() {
        let bad = RadarScene {
            angles: vec![0.0],
            strengths: vec![-1.0],
            amplitudes: vec![c(1.0, 0.0)],
        };
        assert!(radar_covariance(&bad, 2, D, LAM).is_err());
        assert!(RadarScene::new(vec![0.0], vec![-1.0], vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn covariance_rejects_non_psd() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(RadarCovariance::new(m).is_err());
    }

    #[test]
    fn channel_statistics() {
        let mut rng = stream_rng(11, Stream::Channel);
        let (nt, m, reps) = (10, 4, 10_000);
        let mut acc = 0.0;
        for _ in 0..reps {
            acc += sample_channel(&mut rng, nt, m).h.norm_squared();
        }
        let var = acc / (reps * nt * m) as f64;
        assert!((var - 0.1).abs() < 0.005, "per-entry variance {var}");
    }

    #[test]
    fn channel_determinism() {
        let a = sample_channel(&mut stream_rng(3, Stream::Channel), 10, 4);
        let b = sample_channel(&mut stream_rng(3, Stream::Channel), 10, 4);
        let c = sample_channel(&mut stream_rng(4, Stream::Channel), 10, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn symbols_are_nearly_orthonormal() {
        let mut rng = stream_rng(5, Stream::Symbols);
        let l = 10_000;
        let s = sample_symbols(&mut rng, 4, l).unwrap();
        let gram = (&s * s.adjoint()) / c(l as f64, 0.0);
        let dev = (gram - CMatrix::identity(4, 4)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 0.05, "{dev}");

        let s1 = sample_symbols(&mut rng, 1, 1000).unwrap();
        let p = s1.norm_squared() / 1000.0;
        assert!((p - 1.0).abs() < 0.1, "{p}");

        let again = sample_symbols(&mut stream_rng(5, Stream::Symbols), 4, l).unwrap();
        let first = sample_symbols(&mut stream_rng(5, Stream::Symbols), 4, l).unwrap();
        assert_eq!(again, first);
        assert!(sample_symbols(&mut rng, 4, 3).is_err());
    }

    #[test]
    fn comm_rx_noiseless_scalar() {
        let mut rng = stream_rng(1, Stream::Noise);
        let h = CMatrix::from_column_slice(2, 1, &[c(1.0, 1.0), c(0.5, -0.2)]);
        let w = BeamformingMatrix::new(CMatrix::from_column_slice(2, 1, &[c(0.3, 0.0), c(-0.1, 0.7)]));
        let s = CMatrix::from_row_slice(1, 3, &[c(1.0, 0.0), c(0.0, -1.0), c(2.0, 0.5)]);
        let chan = CommChannel::new(h.clone()).unwrap();
        let y = synthesize_comm_rx(&chan, &w, &s, 0.0, &mut rng).unwrap();
        let gain = (h.adjoint() * w.matrix())[(0, 0)];
        for l in 0..3 {
            assert!((y[(0, l)] - gain * s[(0, l)]).norm() < 1e-15);
        }
    }

    #[test]
    fn rx_zero_signal() {
        let mut rng = stream_rng(2, Stream::Noise);
        let g = CMatrix::from_element(3, 2, c(1.0, 0.0));
        let w = BeamformingMatrix::zeros(2, 1);
        let s = CMatrix::from_element(1, 5, c(1.0, 0.0));
        let y = synthesize_radar_rx(&g, &w, &s, 0.0, &mut rng).unwrap();
        assert!(y.iter().all(|z| z.norm() == 0.0));

        let s = CMatrix::from_element(1, 10_000, c(1.0, 0.0));
        let y = synthesize_radar_rx(&g, &w, &s, 0.1, &mut rng).unwrap();
        let var = y.norm_squared() / y.len() as f64;
        assert!((var - 0.1).abs() < 0.005, "{var}");
    }

    #[test]
    fn rx_dimension_mismatch() {
        let mut rng = stream_rng(2, Stream::Noise);
        let g = CMatrix::zeros(3, 4);
        let w = BeamformingMatrix::zeros(2, 1);
        let s = CMatrix::zeros(1, 5);
        assert!(synthesize_radar_rx(&g, &w, &s, 0.1, &mut rng).is_err());
        let s_bad = CMatrix::zeros(2, 5);
        let chan = CommChannel::new(CMatrix::zeros(2, 1)).unwrap();
        assert!(synthesize_comm_rx(&chan, &w, &s_bad, 0.1, &mut rng).is_err());
    }

    #[test]
    fn reference_config_is_valid_and_consistent() {
        let cfg = SystemConfig::mmwave_28ghz();
        cfg.validate().unwrap();
        // 100 Mb/s over each user's allocation lands on the listed minima.
        for j in 0..4 {
            assert!((cfg.rate_to_se(j, 100.0e6) - cfg.rate_min[j]).abs() < 1e-4);
        }
    }

    #[test]
    fn config_validation_catches_errors() {
        let mut cfg = SystemConfig::mmwave_28ghz();
        cfg.bw_fraction_radar = 0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::mmwave_28ghz();
        cfg.frame_len = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::mmwave_28ghz();
        cfg.rate_max[0] = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::mmwave_28ghz();
        cfg.rate_min.pop();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn masks() {
        assert!(ReliabilityMask::from_rows(&[vec![0.5, 1.2]]).is_err());
        let m = ReliabilityMask::from_rows(&[vec![0.5, 1.0], vec![0.0, 0.25]]).unwrap();
        assert_eq!(m.kind(), MaskKind::PerEntry);
        assert_eq!(m.value(1, 1), 0.25);
        assert!(m.check_dims(2, 2).is_ok());
        assert!(m.check_dims(2, 3).is_err());

        let mut rng = stream_rng(9, Stream::Mask);
        let r = ReliabilityMask::random_per_entry(&mut rng, 10, 4, 0.5);
        let clamped = match &r {
            ReliabilityMask::PerEntry(b) => b.iter().filter(|v| **v == 0.0 || **v == 1.0).count(),
            _ => unreachable!(),
        };
        assert!(clamped >= 20);
    }
}
