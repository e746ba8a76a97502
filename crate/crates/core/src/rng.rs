//! Seed fan-out.
//!
//! Every random decision draws from its own ChaCha stream keyed by
//! `(master seed, role, a, b)`, where `a`/`b` are role-specific coordinates
//! such as (graph index, epoch). The key is mixed with SplitMix64:
//!
//! ```text
//! k = mix(seed); k = mix(k ^ role); k = mix(k ^ a); k = mix(k ^ b)
//! ```
//!
//! Streams are therefore independent of execution order, and changing how
//! one role consumes randomness never perturbs another role.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    ParamInit = 0x01,
    Shuffle = 0x02,
    MaskNoise = 0x03,
    TopKTieBreak = 0x04,
    Synthetic = 0x05,
    CvSplit = 0x06,
    GradCheck = 0x07,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derived 64-bit key for `(seed, role, a, b)`.
pub fn derive_key(seed: u64, role: Role, a: u64, b: u64) -> u64 {
    let mut k = splitmix64(seed);
    k = splitmix64(k ^ role as u64);
    k = splitmix64(k ^ a);
    splitmix64(k ^ b)
}

pub fn stream(seed: u64, role: Role, a: u64, b: u64) -> Rng {
    Rng::seed_from_u64(derive_key(seed, role, a, b))
}
