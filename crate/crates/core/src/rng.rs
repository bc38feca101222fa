//! Deterministic, splittable random streams.
//!
//! Every Monte Carlo draw gets its own ChaCha8 stream keyed by
//! (seed, k, p, index) through a SplitMix64 expansion, so parallel sampling
//! across indices is reproducible regardless of scheduling and no hidden
//! state leaks between samples.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// The stream f(seed, k, p, index).
pub fn stream_rng(seed: u64, k: u32, p: u32, index: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ 0xa076_1d64_78bd_642f_u64.wrapping_mul(k as u64 + 1)
        ^ 0xe703_7ed1_a0b4_28db_u64.wrapping_mul(p as u64 + 1)
        ^ 0x8ebc_6af0_9c88_c6e3_u64.wrapping_mul(index.wrapping_add(1));
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard complex Gaussian (variance 1 per complex coordinate) via
/// Box-Muller; avoids an extra distribution dependency.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    // u1 in (0, 1]: guard the log
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt(); // variance 1/2 per real component
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    Complex64::new(r * c, r * s)
}
