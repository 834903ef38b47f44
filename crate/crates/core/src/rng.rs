//! Counter-style random streams.
//!
//! Every draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, label, index)`. A stream's contents depend only on its address, so
//! generating agents in a different order (or on different threads) cannot
//! change any value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels. Values are part of the reproducibility contract; never
/// renumber them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum StreamLabel {
    RatingsLeft = 1,
    RatingsRight = 2,
    ScoresLeft = 3,
    ScoresRight = 4,
    RunSeed = 5,
    ProposalOrder = 6,
    Auxiliary = 7,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_bytes(seed: u64, label: StreamLabel) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = seed ^ ((label as u64) << 56);
    for chunk in out.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Returns the generator for stream `(seed, label, index)`.
pub fn stream(seed: u64, label: StreamLabel, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key_bytes(seed, label));
    rng.set_stream(index);
    rng
}

/// Deterministic child seed, e.g. the seed of run `index` of an experiment.
pub fn derive_seed(seed: u64, label: StreamLabel, index: u64) -> u64 {
    mix64(mix64(seed ^ ((label as u64) << 56)) ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}
