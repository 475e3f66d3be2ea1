//! Counter-based Brownian increments keyed by (seed, label, step).
//!
//! Each (label, step) owns a disjoint block of a ChaCha stream: stream id =
//! label, word position = step << 20. The first d normals give the grid
//! increment; the rest refine it by Brownian-bridge midpoints in
//! breadth-first order, so a finer level always extends a coarser one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const MAX_LEVEL: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource { seed }
    }

    fn rng(&self, label: u64, step: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(label);
        r.set_word_pos((step as u128) << 20);
        r
    }

    /// Brownian path values at the 2^level + 1 equally spaced times of
    /// grid step `step`, relative to the start; flat [time][coordinate].
    pub fn bridge(&self, label: u64, step: u64, level: u32, dt: f64, d: usize) -> Vec<f64> {
        let k = 1usize << level;
        let mut rng = self.rng(label, step);
        let mut w = vec![0.0; (k + 1) * d];
        let sd = dt.sqrt();
        for c in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            w[k * d + c] = sd * z;
        }
        for l in 1..=level {
            let stride = 1usize << (level - l);
            let s = (dt / (1u64 << (l + 1)) as f64).sqrt();
            for j in 0..(1usize << (l - 1)) {
                let (lo, mid, hi) = (2 * j * stride, (2 * j + 1) * stride, (2 * j + 2) * stride);
                for c in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w[mid * d + c] = 0.5 * (w[lo * d + c] + w[hi * d + c]) + s * z;
                }
            }
        }
        w
    }

    /// The 2^level increments of grid step `step`; flat [substep][coordinate].
    pub fn increments(&self, label: u64, step: u64, level: u32, dt: f64, d: usize) -> Vec<f64> {
        let w = self.bridge(label, step, level, dt, d);
        let k = 1usize << level;
        let mut out = vec![0.0; k * d];
        for j in 0..k {
            for c in 0..d {
                out[j * d + c] = w[(j + 1) * d + c] - w[j * d + c];
            }
        }
        out
    }
}
