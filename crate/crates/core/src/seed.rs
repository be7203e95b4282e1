//! Seed derivation.
//!
//! Every random table in the crate is filled from a ChaCha8 stream keyed by a
//! 64-bit seed. Child seeds are derived from a parent by mixing a domain tag
//! and a counter through the SplitMix64 finalizer, so the whole tree of maps
//! inside a sketch is fixed by one master seed and identical on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep sibling derivations from colliding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedTag {
    Leaf = 1,
    Combiner = 2,
    CombinerLeft = 3,
    CombinerRight = 4,
    HdLevel = 5,
    LowD = 6,
    Projector = 7,
    Replica = 8,
    Trial = 9,
    Pca = 10,
    Data = 11,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `index`-th child seed of `parent` within the `tag` domain.
pub fn derive_seed(parent: u64, tag: SeedTag, index: u64) -> u64 {
    let a = splitmix64(parent ^ (tag as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(a ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Counter-mode generator for table filling.
pub fn table_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
