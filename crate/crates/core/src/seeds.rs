//! Seed derivation and the pseudorandom generator used everywhere.
//!
//! All randomness comes from [`ChaCha8Rng`], seeded through
//! `SeedableRng::seed_from_u64`. Sub-seeds are derived from one master seed
//! with SplitMix64 mixing:
//!
//! ```text
//! derive(master, stream, index) = mix(mix(master ^ stream.tag()) ^ index)
//! ```
//!
//! where `mix` is the SplitMix64 finalizer. Because every trial's seeds are a
//! pure function of `(master, stream, index)`, results do not depend on the
//! order in which trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GENERATOR_NAME: &str = "ChaCha8Rng/rand_chacha-0.9/seed_from_u64";
pub const SEED_RULE: &str = "splitmix64(splitmix64(master^tag)^index)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial parameters.
    Init,
    /// SGD sample order.
    Order,
    /// Train/test split.
    Split,
    /// Probe selection in stability trials.
    Probe,
    /// Synthetic dataset generation.
    Synth,
    /// Choice of the replacement sample for S'.
    Replacement,
}

impl Stream {
    pub fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x1,
            Stream::Order => 0x2,
            Stream::Split => 0x3,
            Stream::Probe => 0x4,
            Stream::Synth => 0x5,
            Stream::Replacement => 0x6,
        }
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.tag()) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
