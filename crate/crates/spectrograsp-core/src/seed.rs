//! Seed derivation for independent deterministic RNG streams.
//!
//! Every parallel unit of work (an episode, a cross-validation cell, a
//! one-vs-one subproblem) owns an RNG derived from the master seed and the
//! unit's coordinates, so results do not depend on scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a stream path (e.g. `[class_index, episode_index]`).
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &w in stream {
        h = splitmix64(h ^ splitmix64(w));
    }
    h
}

/// ChaCha8 RNG for the given stream path. ChaCha output is stable across
/// platforms and crate versions, which keeps artifacts byte-reproducible.
pub fn stream_rng(master: u64, stream: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_streams_diverge() {
        let a = derive_seed(42, &[0, 0]);
        let b = derive_seed(42, &[0, 1]);
        let c = derive_seed(42, &[1, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(42, &[3, 7]), derive_seed(42, &[3, 7]));
        assert_ne!(derive_seed(42, &[3, 7]), derive_seed(43, &[3, 7]));
    }
}
