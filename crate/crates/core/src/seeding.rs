//! Deterministic seed derivation.
//!
//! Every randomized component takes an explicit `u64` seed and derives
//! per-member seeds through `derive_seed`, so parallel and sequential fits of
//! the same configuration consume identical random streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent child seed from a master seed and a stream index.
///
/// Uses the SplitMix64 finalizer, which maps distinct `(master, stream)`
/// pairs to well-mixed outputs even for small consecutive inputs.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds the reproducible generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derive_seed_is_deterministic() {
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }

    #[test]
    fn derive_seed_separates_streams() {
        let seeds: Vec<u64> = (0..64).map(|i| derive_seed(42, i)).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }

    #[test]
    fn derive_seed_separates_masters() {
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    // Frozen outputs: stored seeds must keep meaning the same streams across
    // releases, so the mixing function may never change silently.
    #[test]
    fn derive_seed_is_stable_across_releases() {
        assert_eq!(derive_seed(0, 0), 16294208416658607535);
        assert_eq!(derive_seed(42, 7), 14769051326987775908);
    }

    #[test]
    fn rng_streams_match_for_equal_seeds() {
        let mut a = rng_from_seed(derive_seed(9, 3));
        let mut b = rng_from_seed(derive_seed(9, 3));
        for _ in 0..16 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }
}
