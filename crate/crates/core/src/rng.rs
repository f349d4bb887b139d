//! Seeded random sources.
//!
//! Every experiment run derives its randomness from one `u64` seed. Separate
//! quantities (channel, scene, initial beamformer, noise) read from separate
//! ChaCha streams of that seed, so changing how many draws one quantity makes
//! never shifts the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Complex64};

/// Independent sub-streams of a per-run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Channel = 1,
    Scene = 2,
    InitialBeamformer = 3,
    Noise = 4,
    Symbols = 5,
    Mask = 6,
}

pub type DfrcRng = ChaCha8Rng;

/// Generator for `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> DfrcRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One circularly-symmetric complex Gaussian draw with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `rows x cols` matrix of i.i.d. CN(0, variance) entries, filled column-major.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}
