//! Pulsed frequency-domain jamming.
//!
//! A jamming action picks a signaling scheme, an on-probability `rho` and a
//! method deciding which resource elements are eligible and how the on/off
//! draws are grouped. Power on each hit element is `P_j / (rho * f)` where
//! `f` is the eligible share of signal-carrying elements, so the average
//! jamming power over the signal region equals `P_j` for every action.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{invalid, Error, Result};
use crate::grid::{ModulationScheme, ReRole, ResourceGrid, RoleMatrix};
use crate::rng::complex_gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammingMethod {
    /// Whole OFDM symbols switch on together.
    Symbol,
    /// Whole subcarriers switch on together.
    Subcarrier,
    /// Independent draw per data element.
    RandomRe,
    /// Independent draw per PDSCH data element.
    PdschData,
    /// Independent draw per DMRS element.
    Dmrs,
    /// Independent draw per data or DMRS element.
    SlotRandom,
}

impl JammingMethod {
    pub const ALL: [JammingMethod; 6] = [
        JammingMethod::Symbol,
        JammingMethod::Subcarrier,
        JammingMethod::RandomRe,
        JammingMethod::PdschData,
        JammingMethod::Dmrs,
        JammingMethod::SlotRandom,
    ];

    /// Methods compared on the coded-OFDM link.
    pub const CODED_OFDM: [JammingMethod; 3] = [
        JammingMethod::Symbol,
        JammingMethod::Subcarrier,
        JammingMethod::RandomRe,
    ];

    /// Methods available to the agent against the slot link.
    pub const SLOT: [JammingMethod; 3] = [
        JammingMethod::PdschData,
        JammingMethod::Dmrs,
        JammingMethod::SlotRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JammingMethod::Symbol => "symbol",
            JammingMethod::Subcarrier => "subcarrier",
            JammingMethod::RandomRe => "random_re",
            JammingMethod::PdschData => "pdsch_data",
            JammingMethod::Dmrs => "dmrs",
            JammingMethod::SlotRandom => "slot_random",
        }
    }

    #[inline]
    pub fn eligible(self, role: ReRole) -> bool {
        match self {
            JammingMethod::Symbol
            | JammingMethod::Subcarrier
            | JammingMethod::RandomRe
            | JammingMethod::PdschData => role == ReRole::Data,
            JammingMethod::Dmrs => role == ReRole::Dmrs,
            JammingMethod::SlotRandom => role.carries_signal(),
        }
    }

    /// Eligible elements as a share of all data and DMRS elements.
    pub fn target_fraction(self, roles: &RoleMatrix) -> f64 {
        let signal = roles.signal_count();
        if signal == 0 {
            return 0.0;
        }
        let eligible = roles.as_slice().iter().filter(|&&r| self.eligible(r)).count();
        eligible as f64 / signal as f64
    }
}

impl fmt::Display for JammingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JammingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JammingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown jamming method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JammerAction {
    pub scheme: ModulationScheme,
    pub rho: f64,
    pub method: JammingMethod,
}

impl JammerAction {
    pub fn new(scheme: ModulationScheme, rho: f64, method: JammingMethod) -> Result<Self> {
        check_rho(rho)?;
        Ok(JammerAction { scheme, rho, method })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return invalid(format!("rho must lie in (0, 1], got {rho}"));
    }
    Ok(())
}

/// Power on a hit element relative to the noise variance.
pub fn instantaneous_power(jnr_db: f64, rho: f64, target_fraction: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return invalid(format!(
            "target fraction must lie in (0, 1], got {target_fraction}"
        ));
    }
    Ok(10f64.powf(jnr_db / 10.0) / (rho * target_fraction))
}

/// On/off mask over the grid (symbol-major like [`RoleMatrix`]).
pub fn make_mask<R: Rng + ?Sized>(
    method: JammingMethod,
    rho: f64,
    roles: &RoleMatrix,
    rng: &mut R,
) -> Vec<bool> {
    let (n_sc, n_sym) = (roles.n_sc(), roles.n_symbols());
    let r = roles.as_slice();
    let mut mask = vec![false; r.len()];
    match method {
        JammingMethod::Symbol => {
            for sym in 0..n_sym {
                if rng.random_bool(rho) {
                    for sc in 0..n_sc {
                        let i = sym * n_sc + sc;
                        mask[i] = method.eligible(r[i]);
                    }
                }
            }
        }
        JammingMethod::Subcarrier => {
            for sc in 0..n_sc {
                let has_data = (0..n_sym).any(|sym| method.eligible(r[sym * n_sc + sc]));
                if has_data && rng.random_bool(rho) {
                    for sym in 0..n_sym {
                        let i = sym * n_sc + sc;
                        mask[i] = method.eligible(r[i]);
                    }
                }
            }
        }
        _ => {
            for (m, &role) in mask.iter_mut().zip(r) {
                if method.eligible(role) {
                    *m = rng.random_bool(rho);
                }
            }
        }
    }
    mask
}

/// Frequency-domain jamming grid for one transmission unit.
///
/// Hit elements carry independent jamming symbols (complex Gaussian or
/// uniformly drawn constellation points) at the instantaneous power implied
/// by the channel's JNR; everything else is zero.
pub fn generate_jamming_grid<R: Rng + ?Sized>(
    action: &JammerAction,
    chan: &ChannelConfig,
    roles: &RoleMatrix,
    rng: &mut R,
) -> Result<ResourceGrid> {
    check_rho(action.rho)?;
    let mut grid = ResourceGrid::zeros(roles.clone());
    if chan.p_j() == 0.0 {
        return Ok(grid);
    }
    let fraction = action.method.target_fraction(roles);
    let power = instantaneous_power(chan.jnr_db, action.rho, fraction)? * chan.sigma2;
    let mask = make_mask(action.method, action.rho, roles, rng);
    let points = match action.scheme {
        ModulationScheme::Awgn => None,
        s => Some(s.constellation()?),
    };
    let amp = power.sqrt();
    for (cell, _) in grid.cells_mut().iter_mut().zip(&mask).filter(|(_, &on)| on) {
        *cell = match &points {
            None => complex_gaussian(rng, power),
            Some(p) => amp * p[rng.random_range(0..p.len())],
        };
    }
    Ok(grid)
}

/// Mean power over the elements `method` may hit.
pub fn jamming_power_per_eligible(grid: &ResourceGrid, method: JammingMethod) -> f64 {
    let (sum, count) = grid
        .cells()
        .iter()
        .zip(grid.roles().as_slice())
        .filter(|(_, &r)| method.eligible(r))
        .fold((0.0, 0usize), |(s, n), (c, _)| (s + c.norm_sqr(), n + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
