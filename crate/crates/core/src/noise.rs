//! Seeded additive Gaussian noise for sinograms.
//!
//! The stream is pinned: a `ChaCha8Rng` seeded with `seed_from_u64(seed)`,
//! 53-bit uniforms from the top bits of `next_u64`, and the Box-Muller
//! transform `z0 = sqrt(-2 ln u1) cos(2 pi u2)`, `z1 = sqrt(-2 ln u1)
//! sin(2 pi u2)` with `u1` in `(0, 1]`. Both outputs of each pair are used,
//! in order.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::image::Sinogram;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Noise standard deviation as a fraction of the data maximum (`0.01` = 1%).
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction.is_finite() && fraction >= 0.0) {
            return Err(Error::InvalidConfig("noise fraction must be non-negative"));
        }
        Ok(NoiseSpec { fraction, seed })
    }
}

/// `n` standard normal draws from the pinned Box-Muller stream.
pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (sin, cos) = libm::sincos(2.0 * PI * u2);
        out.push(r * cos);
        out.push(r * sin);
    }
    out.truncate(n);
    out
}

/// `s'[b] = s[b] + sigma z_b` with `sigma = fraction * max_b s[b]`.
pub fn add_gaussian_noise(s: &Sinogram, spec: &NoiseSpec) -> Result<Sinogram> {
    if spec.fraction == 0.0 || s.is_empty() {
        return Ok(s.clone());
    }
    let sigma = spec.fraction * s.max_value();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let z = standard_normals(&mut rng, s.len());
    let values = s.values().iter().zip(z).map(|(v, z)| v + sigma * z).collect();
    Sinogram::new(s.num_angles(), s.num_beamlets(), values)
}
