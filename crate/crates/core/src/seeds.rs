//! Deterministic sub-seed derivation.
//!
//! Every random draw in an experiment comes from a stream keyed by
//! `(master_seed, purpose tag, indices)`. Distinct purposes never share a
//! stream, so reordering work or adding parallelism cannot change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a_step(hash: u64, byte: u8) -> u64 {
    (hash ^ u64::from(byte)).wrapping_mul(FNV_PRIME)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of `(master, tag, indices)` into a 64-bit sub-seed.
pub fn derive_seed(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in master.to_le_bytes() {
        h = fnv1a_step(h, b);
    }
    for b in tag.as_bytes() {
        h = fnv1a_step(h, *b);
    }
    for idx in indices {
        for b in idx.to_le_bytes() {
            h = fnv1a_step(h, b);
        }
    }
    splitmix64(h)
}

/// Seeded generator for one purpose stream.
pub fn stream(master: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, indices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_tags_give_distinct_seeds() {
        let a = derive_seed(42, "local-train", &[0, 1]);
        let b = derive_seed(42, "expost-noise", &[0, 1]);
        let c = derive_seed(42, "local-train", &[1, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derivation_is_stable() {
        // Frozen: any change here silently breaks reproducibility of
        // previously published runs.
        assert_eq!(derive_seed(42, "synth", &[]), derive_seed(42, "synth", &[]));
        let first = derive_seed(0, "", &[]);
        assert_eq!(first, derive_seed(0, "", &[]));
    }

    #[test]
    fn streams_are_reproducible() {
        use rand::Rng;
        let mut r1 = stream(7, "partition", &[3]);
        let mut r2 = stream(7, "partition", &[3]);
        let x1: u64 = r1.random();
        let x2: u64 = r2.random();
        assert_eq!(x1, x2);
    }
}
