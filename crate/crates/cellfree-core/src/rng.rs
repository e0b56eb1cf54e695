//! Counter-addressed random substreams.
//!
//! Every random quantity in a campaign is drawn from a generator keyed by
//! `(root seed, stream purpose, setup index, realization index)`. The four
//! values are packed into a 256-bit ChaCha key, so distinct tuples give
//! statistically independent streams and the draw for, say, realization 17 of
//! setup 3 is the same no matter which worker thread produces it or in which
//! order realizations are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a substream is used for. The discriminants are part of the
/// reproducibility contract: renumbering them changes every campaign output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    /// AP and UE positions of one setup.
    Geometry = 1,
    /// Shadow fading field of one setup.
    Shadowing = 2,
    /// Small-scale channel vectors of one realization.
    Channel = 3,
    /// Receiver noise during the pilot phase of one realization.
    PilotNoise = 4,
    /// Payload symbols and receiver noise during the data phase.
    Data = 5,
}

/// Generator for the substream identified by `(seed, purpose, setup, realization)`.
pub fn substream(seed: u64, purpose: StreamPurpose, setup: u64, realization: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&setup.to_le_bytes());
    key[24..32].copy_from_slice(&realization.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One circularly-symmetric complex Gaussian sample with unit variance
/// (real and imaginary parts each carry half the power).
pub fn standard_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Fills a length-`n` vector with independent unit-variance complex Gaussians.
pub fn standard_complex_vector<R: Rng>(rng: &mut R, n: usize) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_fn(n, |_, _| standard_complex(rng))
}
