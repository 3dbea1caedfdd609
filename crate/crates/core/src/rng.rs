//! Reproducible random streams.
//!
//! Every simulated path draws from its own ChaCha8 stream. The key is derived
//! from a 64-bit master seed (PCG32 expansion, as in `rand_core`'s
//! `seed_from_u64`) and the path index selects the 64-bit ChaCha stream id, so
//! `(master, path)` identifies a stream independently of platform, thread
//! count, or the order in which paths are simulated.
//!
//! Uniform variates on `[0, 1)` use the top 53 bits of one `u64` word, open
//! uniforms the top 52 bits plus a half-ulp offset; every draw helper
//! in this module consumes exactly one word.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;
const TWO_POW_NEG_52: f64 = 1.0 / (1u64 << 52) as f64;

/// Identifies one random stream: a master seed plus a path index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub const fn new(master: u64, path: u64) -> Self {
        Self { master, path }
    }
}

impl From<u64> for PathSeed {
    fn from(master: u64) -> Self {
        Self { master, path: 0 }
    }
}

/// SplitMix64 finalizer, used to derive independent master seeds for
/// sub-experiments (e.g. one per grid size) from a single user seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A per-path random stream.
#[derive(Debug, Clone)]
pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: PathSeed) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed.master);
        inner.set_stream(seed.path);
        Self { inner }
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        word_to_unit(self.next_word())
    }

    /// Uniform on the open interval `(0, 1)`; safe to pass to `ln`.
    #[inline]
    pub fn open_uniform(&mut self) -> f64 {
        word_to_open_unit(self.next_word())
    }

    /// Exponential with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.open_uniform().ln() / rate
    }
}

#[inline]
pub(crate) fn word_to_unit(word: u64) -> f64 {
    (word >> 11) as f64 * TWO_POW_NEG_53
}

#[inline]
pub(crate) fn word_to_open_unit(word: u64) -> f64 {
    // 52 bits so that the half-offset stays exactly representable below 1.
    ((word >> 12) as f64 + 0.5) * TWO_POW_NEG_52
}

/// Maps a word to an index in `0..len` (multiply-shift; bias below `len / 2^64`).
#[inline]
pub(crate) fn word_to_index(word: u64, len: usize) -> usize {
    ((word as u128 * len as u128) >> 64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = PathRng::new(PathSeed::new(42, 7));
        let mut b = PathRng::new(PathSeed::new(42, 7));
        for _ in 0..1000 {
            assert_eq!(a.next_word(), b.next_word());
        }
    }

    #[test]
    fn distinct_paths_give_distinct_streams() {
        let mut a = PathRng::new(PathSeed::new(42, 0));
        let mut b = PathRng::new(PathSeed::new(42, 1));
        let same = (0..64).filter(|_| a.next_word() == b.next_word()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn stream_is_pinned() {
        // Guards against silent algorithm changes in upstream crates; the
        // acceptance suite relies on byte-stable streams.
        let mut rng = PathRng::new(PathSeed::new(1, 0));
        let first: Vec<u64> = (0..3).map(|_| rng.next_word()).collect();
        let mut again = PathRng::new(PathSeed::new(1, 0));
        assert_eq!(first, (0..3).map(|_| again.next_word()).collect::<Vec<_>>());
        assert_eq!(first[0], PINNED_FIRST_WORD);
    }

    // Frozen from the first run of this generator; see `stream_is_pinned`.
    const PINNED_FIRST_WORD: u64 = 7_424_550_030_962_593_201;

    #[test]
    fn unit_conversions_stay_in_range() {
        assert_eq!(word_to_unit(0), 0.0);
        assert!(word_to_unit(u64::MAX) < 1.0);
        assert!(word_to_open_unit(0) > 0.0);
        assert!(word_to_open_unit(u64::MAX) < 1.0);
        assert_eq!(word_to_index(0, 10), 0);
        assert_eq!(word_to_index(u64::MAX, 10), 9);
    }

    #[test]
    fn mixed_seeds_differ_by_tag() {
        let s: std::collections::HashSet<u64> = (0..100).map(|t| mix_seed(5, t)).collect();
        assert_eq!(s.len(), 100);
    }
}
