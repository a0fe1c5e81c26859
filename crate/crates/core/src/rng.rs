//! Counter-based random streams.
//!
//! Every draw in a simulation comes from a ChaCha stream keyed by
//! `(master seed, purpose, agent, iteration)`. Streams never depend on the
//! order in which they are requested, so runs are reproducible regardless of
//! scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// What a stream is used for; keeps data generation and gradient noise apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Dataset = 0x6461_7461,
    Gradient = 0x6772_6164,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 256-bit key for `(seed, purpose, agent, iteration)`.
pub fn stream_key(seed: u64, purpose: Purpose, agent: u64, iteration: u64) -> [u8; 32] {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for word in [purpose as u64, agent, iteration] {
        state ^= word.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        acc ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        acc = acc.rotate_left(17) ^ splitmix64(&mut state);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    key
}

pub fn stream(seed: u64, purpose: Purpose, agent: u64, iteration: u64) -> Stream {
    Stream::from_seed(stream_key(seed, purpose, agent, iteration))
}

/// Stream for agent `i`'s stochastic gradient at iteration `k`.
pub fn gradient_stream(seed: u64, agent: usize, k: u64) -> Stream {
    stream(seed, Purpose::Gradient, agent as u64, k)
}
