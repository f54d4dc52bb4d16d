//! Counter-based random streams.
//!
//! Every random decision in a simulation is drawn from a ChaCha8 stream
//! whose key is derived from `(seed, purpose, a, b)`. A stream can be
//! recreated from its key at any time, so results do not depend on the
//! order in which rows or images are processed, nor on the thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Initial synapse states, keyed by row.
    Init = 1,
    /// Learning pulses, keyed by (row, clock cycle of the fire).
    Learn = 2,
    /// Read noise, keyed by (clock cycle, row).
    ReadNoise = 3,
    /// Presentation order, keyed by epoch or run.
    Order = 4,
}

/// Open the stream identified by `(seed, purpose, a, b)`.
pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Fisher-Yates shuffle of `0..n` driven by `rng`.
pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}
