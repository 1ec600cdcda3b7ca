//! Link-level simulation of jammed, LDPC-coded OFDM links and a linear
//! contextual Thompson-sampling jammer that learns from ACK/NACK feedback.
//!
//! The modules build on each other bottom-up:
//!
//! - [`grid`]: constellations, resource grids and unitary OFDM modulation.
//! - [`fec`]: LDPC construction, encoding, min-sum decoding and demapping.
//! - [`channel`]: SNR/JNR power bookkeeping and the AWGN combiner.
//! - [`jammer`]: pulsed frequency-domain jamming grids.
//! - [`victim5g`]: a PDSCH-like slot link with DMRS estimation and HARQ.
//! - [`feedback`]: unreliable ACK/NACK observation.
//! - [`bandit`]: the linear Thompson-sampling agent.
//! - [`harness`]: experiment configuration, runners and CSV output.

pub mod bandit;
pub mod channel;
pub mod error;
pub mod fec;
pub mod feedback;
pub mod grid;
pub mod harness;
pub mod jammer;
pub mod rng;
pub mod victim5g;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
