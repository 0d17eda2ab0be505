//! Counter-based random streams.
//!
//! Every random draw in a run is keyed by coordinates such as
//! `(seed, domain, depth, circuit)`, so results do not depend on execution
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// Stream domains keep unrelated uses of the same coordinates apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Circuit = 1,
    Shot = 2,
    Bootstrap = 3,
    Gauge = 4,
    Test = 5,
    Synthetic = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of an arbitrary coordinate tuple.
pub fn mix(seed: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix(seed), |h, &c| splitmix(h ^ splitmix(c)))
}

/// A fresh stream for `(seed, domain, coords…)`.
pub fn stream(seed: u64, domain: Domain, coords: &[u64]) -> Stream {
    let key = mix(seed ^ (domain as u64).rotate_left(32), coords);
    let mut rng = Stream::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}
