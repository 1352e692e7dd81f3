//! Portable seeded random numbers.
//!
//! Every random draw in the crate comes from xoshiro256** seeded through
//! SplitMix64 (`Xoshiro256StarStar::seed_from_u64`), so any implementation
//! with those two published generators reproduces the same weights and
//! synthetic series:
//!
//! - uniform `[0, 1)`: `(next_u64() >> 11) · 2⁻⁵³`
//! - standard normal: Box-Muller cosine branch, `√(−2 ln(1 − u₁)) · cos(2π u₂)`,
//!   consuming two uniforms per sample.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub struct PortableRng(Xoshiro256StarStar);

impl PortableRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
