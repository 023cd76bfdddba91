//! Named, seeded random substreams. Every random draw in the crate comes
//! from one of these so that data, initialization and shuffling can be
//! reproduced independently from a single seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `index` of the generator family `name` under `seed`.
pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let tag = crc32fast::hash(name.as_bytes()) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(index);
    rng
}
