//! Seed derivation. Every stochastic stage gets its own generator derived from
//! a master seed and a stage tag, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a; stable across Rust releases, unlike `DefaultHasher`.
pub fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// `seed ⊕ index`, mixed so neighbouring indices give unrelated streams.
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn derive2(seed: u64, a: u64, b: u64) -> u64 {
    derive(derive(seed, a), b)
}

/// Stage seed from the master seed: `master ⊕ hash(tag)`.
pub fn stage_seed(master: u64, tag: &str) -> u64 {
    derive(master, tag_hash(tag))
}

pub fn rng_from(seed: u64) -> StageRng {
    StageRng::seed_from_u64(seed)
}
