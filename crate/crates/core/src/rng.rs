//! Seed derivation. Every random stream in the crate is a ChaCha8 stream keyed
//! by a master seed plus a stream id, so results never depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the independent random streams of one seed.
pub(crate) mod stream {
    pub const DAG: u64 = 1;
    pub const MECHANISMS: u64 = 2;
    pub const PERTURBATION: u64 = 3;
    pub const PERMUTATIONS: u64 = 4;
    pub const SAMPLING_BASE: u64 = 1 << 32;
}

/// Rng for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a master seed with an index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
