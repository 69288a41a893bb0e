//! Reproducible random streams.
//!
//! Every stream is keyed by `(root_seed, purpose, counter)` and backed by the
//! ChaCha20 block function, so a given key produces the same words on every
//! platform. All derived variates are computed here rather than through
//! `rand`'s distributions, whose algorithms may change between releases.

use alloc::vec::Vec;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

const KEY_TAG: [u8; 8] = *b"alp-rng1";

/// FNV-1a over the purpose tag; stable across platforms and releases.
fn purpose_hash(purpose: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives the stream for `(root_seed, purpose, counter)`.
pub fn derive_stream(root_seed: u64, purpose: &str, counter: u64) -> RngStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&root_seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose_hash(purpose).to_le_bytes());
    key[16..24].copy_from_slice(&counter.to_le_bytes());
    key[24..].copy_from_slice(&KEY_TAG);
    RngStream {
        inner: ChaCha20Rng::from_seed(key),
    }
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha20Rng,
}

impl RngStream {
    /// Splits off an independent child stream, advancing `self` by one word.
    pub fn fork(&mut self, purpose: &str) -> RngStream {
        let seed = self.next_u64();
        derive_stream(seed, purpose, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-and-reject). Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal variate (Box-Muller, one draw per call).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Standard Gumbel variate.
    pub fn gumbel(&mut self) -> f64 {
        -libm::log(-libm::log(self.uniform_open()))
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct values from `0..n`, uniformly, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Index drawn with probability proportional to `weights`. Returns `None`
    /// when no weight is positive.
    pub fn choose_weighted(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        let target = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = Some(i);
                if target < acc {
                    return Some(i);
                }
            }
        }
        last
    }
}
