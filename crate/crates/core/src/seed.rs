//! Seed derivation for independent, order-free random streams.
//!
//! Every stochastic unit of work (scan point, CCM step, sampler, detector)
//! gets its own generator whose seed is a pure function of the parent seed
//! and an index, so results never depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `index` under `parent`:
/// `splitmix64(parent XOR splitmix64(index + 1))`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(1)))
}

/// Domain tags keep sibling streams of one parent seed apart.
pub(crate) mod stream {
    pub const SOURCE: u64 = 0x534f_5552_4345;
    pub const DETECT: u64 = 0x4445_5445_4354;
    pub const DARK_A: u64 = 0x0044_4152_4b41;
    pub const DARK_B: u64 = 0x0044_4152_4b42;
    pub const JITTER: u64 = 0x4a49_5454_4552;
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
