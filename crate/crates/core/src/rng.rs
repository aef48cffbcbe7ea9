//! Counter-style seed derivation. Every random stream in the crate is keyed
//! by a hash of its coordinates (master seed, path index, interval, ...), so
//! results do not depend on thread count or evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) const TAG_BASE: u64 = 0x6261_7365;
pub(crate) const TAG_EXTEND: u64 = 0x6578_7464;
pub(crate) const TAG_BRIDGE: u64 = 0x6272_6467;
pub(crate) const TAG_INIT: u64 = 0x696e_6974;
pub(crate) const TAG_CONTRAST: u64 = 0x636f_6e74;
pub(crate) const TAG_STRONG: u64 = 0x7374_726f;
pub(crate) const TAG_FUNCTIONAL: u64 = 0x6675_6e63;
pub(crate) const TAG_HOLDOUT: u64 = 0x686f_6c64;

/// SplitMix64 finalizer.
#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a list of words.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &w| finalize(acc.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ finalize(w)))
}

/// Seed of path `index` within an ensemble. Adding paths never changes the
/// seeds of existing ones.
pub fn path_seed(master: u64, index: u64) -> u64 {
    mix(&[master, index])
}

pub(crate) fn stream(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(words))
}

pub(crate) fn normal_from_key(words: &[u64]) -> f64 {
    stream(words).sample(StandardNormal)
}
