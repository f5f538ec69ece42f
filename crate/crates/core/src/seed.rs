//! Seed derivation tree.
//!
//! Every random stream in the crate is addressed by a path of integers below
//! a single root seed, e.g. `derive(root, &[STREAM_BOOTSTRAP, pair, side])`.
//! Child seeds are produced with the SplitMix64 finalizer so sibling streams
//! are decorrelated and independent of the order in which work items run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_BOOTSTRAP: u64 = 0x62_6f_6f_74;
pub const STREAM_FIT: u64 = 0x66_69_74;
pub const STREAM_IMPUTE: u64 = 0x69_6d_70;
pub const STREAM_AMPUTE: u64 = 0x61_6d_70;
pub const STREAM_CONSENSUS: u64 = 0x63_6f_6e;
pub const STREAM_DATA: u64 = 0x64_61_74;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed at `path` below `root`.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &step| splitmix64(acc ^ splitmix64(step)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Float keys (ρ, τ) enter seed paths through their bit pattern.
pub fn float_key(x: f64) -> u64 {
    x.to_bits()
}
