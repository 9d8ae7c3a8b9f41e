//! Deterministic random-number substreams.
//!
//! Everything stochastic in this crate (k-means seeding, simulated panels)
//! draws from [`ChaCha8Rng`], a counter-based generator whose output is fixed
//! by its seed on every platform. Seeds are derived, never taken from the
//! OS, so a run is reproducible from a single master seed.
//!
//! Substream derivation: the key parts (master seed, generator digest,
//! replication index, attempt, purpose tag) are folded through SplitMix64,
//! and the resulting state is expanded to the 32-byte ChaCha key. Streams
//! are keyed by indices alone, so results do not depend on execution order
//! and disjoint replications may run concurrently.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag for panel-generation streams.
pub const PURPOSE_PANEL: u64 = 0;
/// Purpose tag for test-side randomness (k-means restart seeding).
pub const PURPOSE_TEST: u64 = 1;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 output step.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds an ordered list of 64-bit parts into one well-mixed state.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &p in parts {
        let mut s = h ^ p;
        h = splitmix64(&mut s);
    }
    h
}

/// FNV-1a hash of a label, for keying streams by cell names.
pub fn hash_label(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Builds the substream identified by `parts`.
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    let mut state = mix(parts);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
