//! Seeded random streams.
//!
//! Every sampler derives its generator from a base seed plus a stream key,
//! so results do not depend on the order in which independent units (shops,
//! tasks, epochs) are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `key` under `seed`.
pub fn stream(seed: u64, key: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(key)))
}

/// Generator for a two-level stream such as (epoch, shop).
pub fn stream2(seed: u64, a: u64, b: u64) -> Rng {
    stream(splitmix(seed ^ splitmix(a)), b)
}
