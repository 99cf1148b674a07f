//! Seeded randomness for instance generation.
//!
//! Every generator in the crate draws from [`SeededRng`], a SplitMix64
//! stream (`rand_xoshiro::SplitMix64`, state initialised to the raw seed).
//! Derived draws are fixed so other implementations can replay them:
//!
//! * `uniform()`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `gaussian()`: Box-Muller on two uniforms `u1, u2`, returning
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`; the sine branch is discarded.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::numkernel::DenseMatrix;

pub const GENERATOR_NAME: &str = "splitmix64";

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n` (multiply-shift, negligible bias for small `n`).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    /// Real Gaussian matrix, or complex with independent real/imaginary parts.
    pub fn gaussian_matrix(&mut self, n: usize, complex: bool) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| {
            let re = self.gaussian();
            let im = if complex { self.gaussian() } else { 0.0 };
            Complex64::new(re, im)
        })
    }

    /// Hermitian part of a Gaussian matrix.
    pub fn hermitian(&mut self, n: usize, complex: bool) -> DenseMatrix {
        self.gaussian_matrix(n, complex).hermitian_part()
    }

    /// Distinct indices drawn by a partial Fisher-Yates shuffle, sorted.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        let mut out = pool[..k.min(n)].to_vec();
        out.sort_unstable();
        out
    }
}
