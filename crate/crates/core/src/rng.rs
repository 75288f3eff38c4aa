//! Seed derivation for reproducible, thread-count independent streams.
//!
//! Every stochastic operation takes an explicit [`Stream`]. Streams are
//! ChaCha8 generators whose 256-bit seeds are derived by hashing a master
//! seed together with a domain tag and a tuple of integer keys, so any
//! (trial, point, purpose) triple gets its own independent stream without
//! sharing mutable state between workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator every stochastic operation consumes.
pub type Stream = ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Instance = 1,
    AbsInit = 2,
    MeasurementTraining = 3,
    GaussianTraining = 4,
    Demo = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `master`, a domain and a key path.
pub fn derive(master: u64, domain: Domain, keys: &[u64]) -> Stream {
    let mut state = master ^ (domain as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut acc = splitmix64(&mut state);
    for &key in keys {
        state ^= key.wrapping_add(acc.rotate_left(17));
        acc = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// A plain seeded stream, for callers that only have one seed.
pub fn from_seed(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
