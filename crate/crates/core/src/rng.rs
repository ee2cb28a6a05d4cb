//! Counter-based random streams: draw `i` of a stream depends only on
//! `(seed, stream, i)`, never on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of one seed apart.
pub mod stream {
    pub const MEASURE: u64 = 1;
    pub const BALL: u64 = 2;
    pub const START: u64 = 3;
    pub const TOY: u64 = 4;
    pub const NESTED: u64 = 5;
}

pub fn indexed(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

pub fn sequential(seed: u64, stream: u64) -> ChaCha8Rng {
    indexed(seed, stream, u64::MAX)
}
