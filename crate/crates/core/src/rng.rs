//! Seeded random streams.
//!
//! Every stochastic component owns a ChaCha8 stream. Streams are keyed by
//! `(master seed, replicate seed, pair id, purpose)` so that independent runs
//! never share state and the same key always replays the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Schemes that only differ in their prefetching
/// policy draw the same channel and training streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channel,
    Training,
    Threshold,
    Prefetch,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Channel => 0x43_48_41_4e,
            Purpose::Training => 0x54_52_41_49,
            Purpose::Threshold => 0x54_48_52_45,
            Purpose::Prefetch => 0x50_52_45_46,
        }
    }
}

/// SplitMix64 finalizer, used to decorrelate nearby integer keys.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed for a sub-computation from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label))
}

/// Opens the stream for one `(master, seed, pair, purpose)` key.
pub fn stream(master: u64, seed: u64, pair_id: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, seed));
    rng.set_stream(derive_seed(pair_id, purpose.tag()));
    rng
}

/// Plain seeded generator for pure functions that take a `seed` argument.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
