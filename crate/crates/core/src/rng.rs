//! Seeding. Every stochastic component draws from ChaCha8 (`rand_chacha` 0.3),
//! whose output stream is specified independently of platform and word size.
//! Child seeds are derived from a master seed by SplitMix64 mixing over an
//! integer key path, so task results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a key path such as `[instance, rep]`.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_seeds_depend_on_every_key_component() {
        let a = derive_seed(7, &[1, 2]);
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
        assert_eq!(a, derive_seed(7, &[1, 2]));
    }

    #[test]
    fn chacha_stream_is_pinned() {
        // guards against a silent generator change in a dependency bump
        assert_eq!(rng_from_seed(0).next_u64(), 0xb585_f767_a79a_3b6c);
        assert_eq!(derive_seed(7, &[1, 2]), 0xf239_3773_88b0_1d44);
    }
}
