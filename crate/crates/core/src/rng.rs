//! Counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream selected by
//! `(seed, purpose, index)`. The key is derived from the seed, the 64-bit
//! stream id packs the purpose tag with the index. Streams are independent,
//! so batching noise, reparametrisation noise and mask noise can each be
//! regenerated for any step without replaying the others. The whole RNG
//! state of a training run is therefore just `(seed, step)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// What a stream is used for. The tag occupies the low byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    Batch = 2,
    LatentNoise = 3,
    MaskNoise = 4,
    Oracle = 5,
    OracleNoise = 6,
    Data = 7,
    Split = 8,
    Eval = 9,
    Test = 10,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream for `(seed, purpose, index)`. `index` must fit in 56 bits.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    debug_assert!(index < (1 << 56), "stream index overflows 56 bits");
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((index << 8) | purpose as u64);
    rng
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}
