//! Counter-based Gaussian increments.
//!
//! Every path owns a ChaCha8 stream selected by its index, and every step
//! reads a fixed 16-word block at position `16·step`. Draws therefore depend
//! only on `(seed, stream, step)`, never on which worker produced them or in
//! what order.

use crate::linalg::{Vect, MAX_DIM};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_STEP: u128 = 16;

/// Mixes a 64-bit value (splitmix64 finalizer).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent family derived from `master` and a tag sequence.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(master), |acc, &t| mix64(acc ^ mix64(t)))
}

/// Standard normal draws for one stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng }
    }

    /// `d ≤ 6` independent standard normals for `step`.
    pub fn normals(&mut self, step: u64, d: usize) -> Vect {
        assert!(d <= MAX_DIM);
        self.rng.set_word_pos(WORDS_PER_STEP * step as u128);
        let mut out = Vect::zeros(d);
        let mut i = 0;
        while i < d {
            // 53-bit uniforms; u1 in (0, 1] keeps the log finite
            let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
            let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[i] = r * c;
            if i + 1 < d {
                out[i + 1] = r * s;
            }
            i += 2;
        }
        out
    }

    /// Brownian increments `ΔB_k ~ N(0, dt I_d)` for steps `0..steps`.
    pub fn increments(&mut self, steps: usize, d: usize, dt: f64) -> Vec<Vect> {
        let s = dt.sqrt();
        (0..steps).map(|k| self.normals(k as u64, d).scale(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_depend_only_on_key() {
        let mut a = NormalStream::new(7, 3);
        let mut b = NormalStream::new(7, 3);
        let late = a.normals(40, 4);
        let _ = b.normals(0, 4);
        assert_eq!(b.normals(40, 4), late);
        assert_ne!(NormalStream::new(7, 4).normals(40, 4), late);
    }

    #[test]
    fn moments() {
        let mut s = NormalStream::new(1, 0);
        let n = 40_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..n {
            let v = s.normals(k, 6);
            for i in 0..6 {
                m1 += v[i];
                m2 += v[i] * v[i];
            }
        }
        let cnt = 6.0 * n as f64;
        assert!((m1 / cnt).abs() < 4.0 / cnt.sqrt());
        assert!((m2 / cnt - 1.0).abs() < 4.0 * (2.0 / cnt).sqrt());
    }
}
