//! Bit-exact splitmix64 streams.
//!
//! Every backend draws randomness through [`RngState`], so two backends reset
//! from the same stream see the same numbers in the same order. Not
//! cryptographic.

use serde::{Deserialize, Serialize};

/// Weyl increment of splitmix64 (also the golden-ratio constant).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// The splitmix64 finalizer. A bijection on `u64`.
#[inline(always)]
pub const fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// State of one splitmix64 stream. Plain data; advancing it is a pure function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngState {
    pub counter: u64,
}

impl RngState {
    pub const fn new(counter: u64) -> Self {
        Self { counter }
    }

    /// Derives the stream for environment `env_index` under `base_seed`.
    ///
    /// `GOLDEN_GAMMA` is odd, so multiplying by it is a bijection and
    /// distinct indices always give distinct counters for a fixed seed.
    pub const fn derive(base_seed: u64, env_index: u32) -> Self {
        let salt = GOLDEN_GAMMA.wrapping_mul(env_index as u64 + 1);
        Self {
            counter: splitmix_mix(base_seed ^ salt),
        }
    }

    #[inline(always)]
    pub const fn next(self) -> (Self, u64) {
        let counter = self.counter.wrapping_add(GOLDEN_GAMMA);
        (Self { counter }, splitmix_mix(counter))
    }

    /// Uniform draw in `[0, 1)` from the top 24 bits of the next output.
    #[inline(always)]
    pub fn uniform(self) -> (Self, f32) {
        let (next, bits) = self.next();
        (next, bits_to_unit(bits))
    }

    /// Uniform draw in `[0, n)`. Uses the high bits (Lemire-style multiply),
    /// which is slightly biased for large `n` but fine for small action sets.
    #[inline]
    pub fn below(self, n: u32) -> (Self, u32) {
        let (next, bits) = self.next();
        (next, (((bits >> 32) * n as u64) >> 32) as u32)
    }
}

/// Maps the top 24 bits of a raw output to `[0, 1)`.
#[inline(always)]
pub fn bits_to_unit(bits: u64) -> f32 {
    (bits >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
}

/// Free-function form of [`RngState::next`].
pub fn rng_next(state: RngState) -> (RngState, u64) {
    state.next()
}

/// Free-function form of [`RngState::uniform`].
pub fn rng_uniform(state: RngState) -> (RngState, f32) {
    state.uniform()
}

/// Free-function form of [`RngState::derive`].
pub fn derive_stream(base_seed: u64, env_index: u32) -> RngState {
    RngState::derive(base_seed, env_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    // Frozen from an independent Python splitmix64 written before this module.
    #[test]
    fn first_output_matches_published_splitmix64() {
        let (_, out) = RngState::new(0).next();
        assert_eq!(out, 0xE220_A839_7B1D_CDAF);
        let (_, out) = RngState::new(1).next();
        assert_eq!(out, 0x910A_2DEC_8902_5CC1);
        let (_, out) = RngState::new(2).next();
        assert_eq!(out, 0x9758_35DE_1C97_56CE);
        let (s, _) = RngState::new(0).next();
        assert_eq!(s.next().1, 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derive_matches_oracle() {
        assert_eq!(derive_stream(0, 0).counter, 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_stream(0, 1).counter, 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(derive_stream(42, 7).counter, 0xB434_6C5A_4AC0_89C3);
    }

    #[test]
    fn next_is_pure() {
        let s = RngState::new(123_456);
        assert_eq!(s.next(), s.next());
        assert_eq!(s.uniform(), s.uniform());
    }

    #[test]
    fn first_million_counters_do_not_collide() {
        let mut seen = HashSet::with_capacity(1_000_000);
        for c in 0..1_000_000u64 {
            assert!(seen.insert(RngState::new(c).next().1), "collision at counter {c}");
        }
    }

    #[test]
    fn uniform_boundaries() {
        assert_eq!(bits_to_unit(0x0000_00FF_FFFF_FFFF), 0.0);
        let top = bits_to_unit(u64::MAX);
        assert_eq!(top, ((1u32 << 24) - 1) as f32 / (1u32 << 24) as f32);
        assert!(top < 1.0);
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut s = RngState::new(7);
        let mut sum = 0.0f64;
        for _ in 0..1_000_000 {
            let (n, u) = s.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u as f64;
            s = n;
        }
        assert!((sum / 1e6 - 0.5).abs() < 0.01);
    }

    #[test]
    fn derived_streams_are_distinct() {
        assert_eq!(derive_stream(9, 3), derive_stream(9, 3));
        assert_ne!(derive_stream(0, 0), derive_stream(0, 1));
        let counters: HashSet<u64> = (0..65_536u32).map(|i| derive_stream(0xDEAD_BEEF, i).counter).collect();
        assert_eq!(counters.len(), 65_536);
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = RngState::new(1);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            let (n, a) = s.below(3);
            counts[a as usize] += 1;
            s = n;
        }
        assert!(counts.iter().all(|&c| c > 9_000));
    }
}
