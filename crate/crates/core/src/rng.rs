//! SplitMix64, the single PRNG used everywhere a seed appears.
//!
//! The generator is tiny, has no platform-dependent behaviour and is fully
//! specified by its three constants, so every seeded result in the crate is
//! bit-reproducible across machines. Independent streams are obtained with
//! [`derive_seed`].

use alloc::vec::Vec;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `master`:
/// `mix64(mix64(master) ^ (index + 1) * GOLDEN_GAMMA)`.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// Folds a sequence of words into a seed, order-sensitively.
pub fn hash_words<I: IntoIterator<Item = u64>>(seed: u64, words: I) -> u64 {
    words
        .into_iter()
        .fold(mix64(seed), |acc, w| mix64(acc ^ w.wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. Uses the widening-multiply reduction; the
    /// bias is below 2^-64 * n and irrelevant here.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, returned in ascending order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }

    /// `k` indices from `0..n` drawn with replacement, in draw order.
    pub fn bootstrap_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.below(n)).collect()
    }

    /// Index drawn from an unnormalized discrete distribution.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.next_f64() * total;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                return i;
            }
            target -= w;
        }
        // Rounding can leave a sliver past the last bucket.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}
