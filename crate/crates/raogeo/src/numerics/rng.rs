//! Deterministic seeded random streams.
//!
//! All sampling in the crate flows through [`StreamRng`], a counter-based
//! ChaCha8 generator. Independent substreams are derived from a
//! `(seed, index)` pair, so parallel replicates reproduce bit-identically
//! regardless of scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates substream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seeded random stream with explicit state; no global RNG anywhere.
pub struct StreamRng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl StreamRng {
    pub fn from_seed(seed: u64) -> Self {
        StreamRng {
            rng: ChaCha8Rng::seed_from_u64(mix(seed)),
            spare_normal: None,
        }
    }

    /// Substream `index` of the stream family identified by `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        StreamRng {
            rng: ChaCha8Rng::seed_from_u64(mix(mix(seed) ^ index)),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform double in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / 4503599627370496.0)
    }

    /// Standard normal via the Box-Muller transform (pairs cached).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Poisson draw by sequential-search inversion of the CDF.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        let u = self.uniform();
        let mut pmf = (-lambda).exp();
        let mut cdf = pmf;
        let mut k = 0u64;
        let cap = (10.0 * lambda + 200.0) as u64;
        while u > cdf && k < cap {
            k += 1;
            pmf *= lambda / k as f64;
            cdf += pmf;
        }
        k
    }

    /// Index in `0..w.len()` by inverse-CDF over the weights (must sum to 1).
    pub fn categorical(&mut self, w: &[f64]) -> usize {
        let u = self.uniform();
        let mut cdf = 0.0;
        for (i, &p) in w.iter().enumerate() {
            cdf += p;
            if u <= cdf {
                return i;
            }
        }
        w.len() - 1
    }
}
