//! Seeded random source shared by the planner, the tuner and the samplers.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood), a 64-bit counter hashed
//! through a fixed finalizer. Given the same seed it produces the same stream
//! on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::Vec3;

#[derive(Debug, Clone)]
pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.unit()
    }

    pub fn uniform_vec(&mut self, lo: Vec3, hi: Vec3) -> Vec3 {
        Vec3::new(self.uniform(lo.x, hi.x), self.uniform(lo.y, hi.y), self.uniform(lo.z, hi.z))
    }

    /// Uniform in the cube `[-s, s]³`.
    pub fn cube(&mut self, s: f64) -> Vec3 {
        self.uniform_vec(Vec3::splat(-s), Vec3::splat(s))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    /// Child generator with a decorrelated stream.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn splitmix_reference_output() {
        // first output of SplitMix64 seeded with 0
        assert_eq!(SeededRng::new(0).next_u64(), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut r = SeededRng::new(7);
        for _ in 0..10_000 {
            let x = r.uniform(-2.0, 3.0);
            assert!((-2.0..3.0).contains(&x));
        }
    }
}
