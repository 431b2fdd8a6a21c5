//! Counter-addressable random streams.
//!
//! Every draw is keyed by `(master seed, stream, index)`, so frame `t` of the
//! channel stream can be regenerated without touching frames `1..t`, and
//! network initialization, replay sampling and channel draws never share
//! state.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Channel = 2,
    NetInit = 3,
    Replay = 4,
    Schedule = 5,
    Instances = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(seed, stream, index)` cell.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix64(seed),
        splitmix64(stream as u64 ^ 0xD1B5_4A32_D192_ED03),
        splitmix64(index.wrapping_add(0x8CB9_2BA7_2F3D_8DD7)),
        splitmix64(seed ^ (stream as u64).rotate_left(32) ^ index.rotate_left(17)),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` from the top 53 bits of a 64-bit word.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-mean exponential by inverse CDF.
pub fn exp1(rng: &mut impl RngCore) -> f64 {
    -(-unit_f64(rng)).ln_1p()
}
