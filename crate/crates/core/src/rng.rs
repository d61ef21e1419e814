//! Deterministic randomness.
//!
//! The generator is xoshiro256++ seeded through SplitMix64 (the reference
//! seeding procedure of the xoshiro authors). Floats are derived with
//! fixed, documented recipes so that other implementations can reproduce
//! the same streams:
//!
//! * `uniform01`: `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`.
//! * `uniform(a, b)`: `a + (b - a) * uniform01()`.
//! * `standard_normal`: Box-Muller from two consecutive uniforms `u1, u2`,
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`; the sine branch is discarded.
//! * `below(n)`: `(next_u64() as u128 * n) >> 64`.
//!
//! Sub-streams for trial `k` of seed `s` are seeded with [`derive_seed`].

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

/// Creates the deterministic stream for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng {
        inner: Xoshiro256PlusPlus::seed_from_u64(seed),
    }
}

impl SeededRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform01()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }
}
