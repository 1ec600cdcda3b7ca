use std::f64::consts::{FRAC_PI_4, SQRT_2};

use super::LlrBlock;
use crate::error::{invalid, Result};
use crate::grid::ModulationScheme;
use crate::C64;

/// Soft demapper for the victim constellations.
///
/// LLRs are natural-log ratios `ln P(b=0|y) / P(b=1|y)` for Gaussian noise of
/// variance `noise_var` per real dimension around `amp * s`. BPSK and QPSK
/// are exact; 16QAM uses the max-log approximation.
#[derive(Debug, Clone, Copy)]
pub struct Demapper {
    scheme: ModulationScheme,
    derotate: C64,
}

impl Demapper {
    pub fn new(scheme: ModulationScheme) -> Result<Self> {
        if scheme == ModulationScheme::Awgn {
            return invalid("no demapper for the awgn scheme");
        }
        let derotate = if scheme.is_rotated() {
            C64::from_polar(1.0, -FRAC_PI_4)
        } else {
            C64::new(1.0, 0.0)
        };
        Ok(Demapper { scheme, derotate })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol().unwrap_or(1)
    }

    /// Append the LLRs of one received symbol. An infinite `noise_var`
    /// marks an erasure and yields zero LLRs.
    #[inline]
    pub fn push(&self, y: C64, amp: f64, noise_var: f64, out: &mut Vec<f64>) {
        let y = y * self.derotate;
        if !noise_var.is_finite() {
            out.extend(std::iter::repeat_n(0.0, self.bits_per_symbol()));
            return;
        }
        match self.scheme.base() {
            ModulationScheme::Bpsk => out.push(2.0 * amp * y.re / noise_var),
            ModulationScheme::Qpsk => {
                let g = SQRT_2 * amp / noise_var;
                out.push(g * y.re);
                out.push(g * y.im);
            }
            ModulationScheme::Qam16 => {
                let s = amp / 10f64.sqrt();
                let (i_sign, i_mag) = pam4_max_log(y.re, s, noise_var);
                let (q_sign, q_mag) = pam4_max_log(y.im, s, noise_var);
                out.extend_from_slice(&[i_sign, q_sign, i_mag, q_mag]);
            }
            _ => unreachable!("rejected in Demapper::new"),
        }
    }
}

/// Max-log LLRs of the (sign, magnitude) bits of one Gray PAM4 axis with
/// levels `{±1, ±3} * s`.
#[inline]
fn pam4_max_log(x: f64, s: f64, noise_var: f64) -> (f64, f64) {
    let d = |level: f64| {
        let e = x - level * s;
        e * e
    };
    let (p1, p3, m1, m3) = (d(1.0), d(3.0), d(-1.0), d(-3.0));
    let inv = 1.0 / (2.0 * noise_var);
    let sign = (m1.min(m3) - p1.min(p3)) * inv;
    let mag = (p3.min(m3) - p1.min(m1)) * inv;
    (sign, mag)
}

/// LLRs for a symbol sequence with a common amplitude and noise variance
/// (per real dimension).
pub fn compute_llrs(symbols: &[C64], scheme: ModulationScheme, amp: f64, noise_var: f64) -> Result<LlrBlock> {
    if noise_var.is_nan() || noise_var <= 0.0 {
        return invalid(format!("noise variance must be positive, got {noise_var}"));
    }
    let demapper = Demapper::new(scheme)?;
    let mut out = Vec::with_capacity(symbols.len() * demapper.bits_per_symbol());
    for &y in symbols {
        demapper.push(y, amp, noise_var, &mut out);
    }
    LlrBlock::new(out)
}
