//! LDPC coding and soft demapping.

mod code;
mod decode;
mod demap;
mod layout;

pub use code::LdpcCode;
pub(crate) use decode::decode_batch;
#[cfg(test)]
pub(crate) use decode::decode_slice;
pub use decode::{ldpc_decode, DecodeOutput, DEFAULT_MAX_ITERS, MIN_SUM_NORMALIZATION};
pub use demap::{compute_llrs, Demapper};
pub use layout::{extract_llrs_from_grid, map_codewords_to_grid, CodewordLayout, NoiseVar};

use crate::error::{invalid, Result};

/// Block of per-bit log-likelihood ratios (positive favors bit 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrBlock {
    values: Vec<f64>,
}

impl LlrBlock {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("LLR {i} is not finite ({})", values[i]));
        }
        Ok(LlrBlock { values })
    }

    /// Values produced by the demapper are finite by construction; non-finite
    /// entries are clamped rather than rejected.
    pub(crate) fn from_finite(mut values: Vec<f64>) -> Self {
        for v in values.iter_mut() {
            if v.is_nan() {
                *v = 0.0;
            } else if v.is_infinite() {
                *v = v.signum() * f64::MAX;
            }
        }
        LlrBlock { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    /// Chase combining: elementwise sum.
    pub fn combine(&mut self, other: &LlrBlock) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}
