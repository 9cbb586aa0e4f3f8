//! SplitMix64: the deterministic generator behind secret-key sampling and
//! channel noise.
//!
//! The algorithm is Steele, Lea and Flood's SplitMix64 (the `java.util`
//! `SplittableRandom` finalizer). It is small enough to re-implement from its
//! published constants in any language, which keeps seeded flip sets and key
//! schedules reproducible outside this crate. Reports that depend on the
//! stream identify it as `"splitmix64"`.

use num_bigint::BigUint;

/// Identifier recorded in simulation reports for cross-implementation replay.
pub const ALGORITHM_ID: &str = "splitmix64";

/// A SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[0, bound)` by rejection, `bound >= 1`.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound >= 1);
        if bound == 1 {
            return 0;
        }
        // Reject draws from the biased tail of the 2^64 range.
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform big integer in `[0, bound)`, `bound >= 1`.
    pub fn big_below(&mut self, bound: &BigUint) -> BigUint {
        use num_traits::Zero;
        debug_assert!(!bound.is_zero());
        let bits = bound.bits();
        let words = bits.div_ceil(64) as usize;
        let top_mask = if bits % 64 == 0 {
            u64::MAX
        } else {
            (1u64 << (bits % 64)) - 1
        };
        loop {
            let mut limbs = alloc::vec::Vec::with_capacity(words);
            for i in 0..words {
                let mut w = self.next_u64();
                if i == words - 1 {
                    w &= top_mask;
                }
                limbs.push(w);
            }
            let candidate = BigUint::from_slice(
                &limbs
                    .iter()
                    .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                    .collect::<alloc::vec::Vec<u32>>(),
            );
            if &candidate < bound {
                return candidate;
            }
        }
    }
}
