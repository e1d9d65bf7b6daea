//! Deterministic random-number substreams.
//!
//! Every randomized routine takes an explicit seed or generator. Substreams
//! are derived by chaining a master seed with a path of indices (sweep cell,
//! trial, method, replicate, ...) through the SplitMix64 finalizer and
//! seeding ChaCha8 with the result. Derivation depends only on the path, not
//! on evaluation order, so parallel schedules cannot change any output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; bijective mixing of a 64-bit word.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit seed for `(master, path...)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = mix(master);
    for &p in path {
        state = mix(state ^ mix(p));
    }
    state
}

/// Derives the generator for `(master, path...)`.
pub fn substream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
