//! Seeded random streams.
//!
//! Every replication owns a handful of independent ChaCha streams derived
//! from `(seed, stream)`; ChaCha output is platform independent, which keeps
//! CSV output byte-identical across machines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub type SimRng = ChaCha8Rng;

/// Named stream ids so different consumers never share a keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Agent = 1,
    Environment = 2,
    Feedback = 3,
    Payload = 4,
    Code = 5,
    Sweep = 6,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Sub-stream `index` of a named stream (sweep points, replications).
pub fn indexed_stream(seed: u64, which: Stream, index: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((which as u64) << 32) | index as u64);
    rng
}

/// Circularly symmetric complex Gaussian with total variance `var`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}
