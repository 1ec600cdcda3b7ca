//! OFDM resource grids, constellation mapping and unitary OFDM modulation.
//!
//! Grid rows are FFT bins: row `k` of a column is carried by
//! `exp(j2πkt/N)` in the time domain. Both transform directions are scaled
//! by `1/√N`, so average power per resource element equals average power per
//! time sample.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Signaling scheme of a victim or jamming waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationScheme {
    Awgn,
    Bpsk,
    BpskPi4,
    Qpsk,
    QpskPi4,
    Qam16,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 6] = [
        ModulationScheme::Awgn,
        ModulationScheme::Bpsk,
        ModulationScheme::BpskPi4,
        ModulationScheme::Qpsk,
        ModulationScheme::QpskPi4,
        ModulationScheme::Qam16,
    ];

    /// The five jamming signaling schemes of the bandit action space.
    pub const JAMMING: [ModulationScheme; 5] = [
        ModulationScheme::Awgn,
        ModulationScheme::Bpsk,
        ModulationScheme::BpskPi4,
        ModulationScheme::Qpsk,
        ModulationScheme::QpskPi4,
    ];

    /// Bits carried per symbol; `None` for the Gaussian scheme.
    pub fn bits_per_symbol(self) -> Option<usize> {
        match self {
            ModulationScheme::Awgn => None,
            ModulationScheme::Bpsk | ModulationScheme::BpskPi4 => Some(1),
            ModulationScheme::Qpsk | ModulationScheme::QpskPi4 => Some(2),
            ModulationScheme::Qam16 => Some(4),
        }
    }

    pub fn is_rotated(self) -> bool {
        matches!(self, ModulationScheme::BpskPi4 | ModulationScheme::QpskPi4)
    }

    /// Unrotated base scheme (`BpskPi4 -> Bpsk`, `QpskPi4 -> Qpsk`).
    pub fn base(self) -> ModulationScheme {
        match self {
            ModulationScheme::BpskPi4 => ModulationScheme::Bpsk,
            ModulationScheme::QpskPi4 => ModulationScheme::Qpsk,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Awgn => "awgn",
            ModulationScheme::Bpsk => "bpsk",
            ModulationScheme::BpskPi4 => "bpsk_pi4",
            ModulationScheme::Qpsk => "qpsk",
            ModulationScheme::QpskPi4 => "qpsk_pi4",
            ModulationScheme::Qam16 => "qam16",
        }
    }

    /// Constellation points indexed by their bit label (first bit is the
    /// most significant). Unit average energy, Gray labeled.
    pub fn constellation(self) -> Result<Vec<C64>> {
        let base: Vec<C64> = match self.base() {
            ModulationScheme::Awgn => {
                return invalid("the awgn scheme has no constellation");
            }
            ModulationScheme::Bpsk => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
            ModulationScheme::Qpsk => (0..4u8)
                .map(|label| {
                    let b0 = (label >> 1) & 1;
                    let b1 = label & 1;
                    C64::new(sign(b0), sign(b1)) * FRAC_1_SQRT_2
                })
                .collect(),
            ModulationScheme::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                (0..16u8)
                    .map(|label| {
                        let b0 = (label >> 3) & 1;
                        let b1 = (label >> 2) & 1;
                        let b2 = (label >> 1) & 1;
                        let b3 = label & 1;
                        let i = sign(b0) * (2.0 - sign(b2));
                        let q = sign(b1) * (2.0 - sign(b3));
                        C64::new(i, q) * scale
                    })
                    .collect()
            }
            ModulationScheme::BpskPi4 | ModulationScheme::QpskPi4 => unreachable!(),
        };
        if self.is_rotated() {
            let rot = C64::from_polar(1.0, FRAC_PI_4);
            Ok(base.into_iter().map(|s| s * rot).collect())
        } else {
            Ok(base)
        }
    }
}

#[inline]
fn sign(bit: u8) -> f64 {
    1.0 - 2.0 * bit as f64
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModulationScheme::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown modulation scheme `{s}`")))
    }
}

/// Map bits (0/1 values) onto Gray-labeled constellation points.
pub fn map_bits(bits: &[u8], scheme: ModulationScheme) -> Result<Vec<C64>> {
    let bps = match scheme.bits_per_symbol() {
        Some(b) => b,
        None => return invalid("cannot map bits with the awgn scheme"),
    };
    if !bits.len().is_multiple_of(bps) {
        return invalid(format!(
            "{} bits is not a multiple of {bps} bits per {scheme} symbol",
            bits.len()
        ));
    }
    let points = scheme.constellation()?;
    Ok(bits
        .chunks_exact(bps)
        .map(|group| points[label_of(group)])
        .collect())
}

#[inline]
pub(crate) fn label_of(group: &[u8]) -> usize {
    group.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Role of one resource element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReRole {
    Data,
    Dmrs,
    Guard,
    Null,
}

impl ReRole {
    /// Data and DMRS elements carry signal; guard and null elements do not.
    pub fn carries_signal(self) -> bool {
        matches!(self, ReRole::Data | ReRole::Dmrs)
    }
}

/// Per-element roles of a grid, stored symbol-major (`sym * n_sc + sc`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleMatrix {
    n_sc: usize,
    n_symbols: usize,
    roles: Vec<ReRole>,
}

impl RoleMatrix {
    pub fn filled(n_sc: usize, n_symbols: usize, role: ReRole) -> Self {
        RoleMatrix {
            n_sc,
            n_symbols,
            roles: vec![role; n_sc * n_symbols],
        }
    }

    pub fn n_sc(&self) -> usize {
        self.n_sc
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    #[inline]
    pub fn index(&self, sc: usize, sym: usize) -> usize {
        sym * self.n_sc + sc
    }

    #[inline]
    pub fn get(&self, sc: usize, sym: usize) -> ReRole {
        self.roles[self.index(sc, sym)]
    }

    pub fn set(&mut self, sc: usize, sym: usize, role: ReRole) {
        let i = self.index(sc, sym);
        self.roles[i] = role;
    }

    pub fn as_slice(&self) -> &[ReRole] {
        &self.roles
    }

    pub fn column(&self, sym: usize) -> &[ReRole] {
        &self.roles[sym * self.n_sc..(sym + 1) * self.n_sc]
    }

    pub fn count(&self, role: ReRole) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    /// Number of signal-carrying (data or DMRS) elements.
    pub fn signal_count(&self) -> usize {
        self.roles.iter().filter(|r| r.carries_signal()).count()
    }
}

/// Static OFDM numerology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfdmConfig {
    /// FFT size.
    pub n_sc: usize,
    /// Data-carrying bins in ascending frequency order.
    pub data_subcarriers: Vec<usize>,
    pub guard_band: Vec<usize>,
    pub center_null: Option<usize>,
    /// Cyclic prefix length of each symbol within one unit.
    pub cp_lengths: Vec<usize>,
    pub symbols_per_unit: usize,
}

impl OfdmConfig {
    /// Coded-OFDM layout used by the BLER sweep and LLR experiments: a
    /// 512-point FFT with 324 data bins around a DC null, 41 guard bins on
    /// each side, cyclic prefix 27. Remaining bins are unused.
    pub fn coded_ofdm(symbols_per_unit: usize) -> Self {
        let n_sc = 512;
        let half_data = 162;
        let guard_each = 41;
        let neg = |offset: usize| n_sc - offset;
        // Ascending frequency: most negative data bin first.
        let mut data_subcarriers: Vec<usize> = (1..=half_data).rev().map(neg).collect();
        data_subcarriers.extend(1..=half_data);
        let mut guard_band: Vec<usize> = (half_data + 1..=half_data + guard_each).rev().map(neg).collect();
        guard_band.extend(half_data + 1..=half_data + guard_each);
        OfdmConfig {
            n_sc,
            data_subcarriers,
            guard_band,
            center_null: Some(0),
            cp_lengths: vec![27; symbols_per_unit],
            symbols_per_unit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sc == 0 || self.symbols_per_unit == 0 {
            return invalid("n_sc and symbols_per_unit must be positive");
        }
        if self.cp_lengths.len() != self.symbols_per_unit {
            return invalid(format!(
                "cp_lengths has {} entries, expected {}",
                self.cp_lengths.len(),
                self.symbols_per_unit
            ));
        }
        if self.cp_lengths.iter().any(|&cp| cp > self.n_sc) {
            return invalid("cyclic prefix longer than the symbol");
        }
        let mut seen = vec![false; self.n_sc];
        let all = self
            .data_subcarriers
            .iter()
            .chain(self.guard_band.iter())
            .chain(self.center_null.iter());
        for &k in all {
            if k >= self.n_sc {
                return invalid(format!("subcarrier {k} outside [0, {})", self.n_sc));
            }
            if seen[k] {
                return invalid(format!("subcarrier {k} assigned twice"));
            }
            seen[k] = true;
        }
        Ok(())
    }

    /// Role of each bin for one symbol. Bins not listed anywhere are `Null`.
    pub fn column_roles(&self) -> Vec<ReRole> {
        let mut col = vec![ReRole::Null; self.n_sc];
        for &k in &self.data_subcarriers {
            col[k] = ReRole::Data;
        }
        for &k in &self.guard_band {
            col[k] = ReRole::Guard;
        }
        col
    }

    pub fn role_matrix(&self, n_symbols: usize) -> RoleMatrix {
        let col = self.column_roles();
        let mut roles = Vec::with_capacity(self.n_sc * n_symbols);
        for _ in 0..n_symbols {
            roles.extend_from_slice(&col);
        }
        RoleMatrix {
            n_sc: self.n_sc,
            n_symbols,
            roles,
        }
    }

    #[inline]
    pub fn cp_len(&self, sym: usize) -> usize {
        self.cp_lengths[sym % self.symbols_per_unit]
    }

    /// Time samples (CP included) needed for `n_symbols` symbols.
    pub fn samples_for(&self, n_symbols: usize) -> usize {
        (0..n_symbols).map(|m| self.n_sc + self.cp_len(m)).sum()
    }
}

/// Complex resource grid plus the role of every element.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    cells: Vec<C64>,
    roles: RoleMatrix,
}

impl ResourceGrid {
    pub fn zeros(roles: RoleMatrix) -> Self {
        ResourceGrid {
            cells: vec![C64::new(0.0, 0.0); roles.len()],
            roles,
        }
    }

    pub fn from_parts(cells: Vec<C64>, roles: RoleMatrix) -> Result<Self> {
        if cells.len() != roles.len() {
            return invalid(format!(
                "{} cells for a {}x{} role matrix",
                cells.len(),
                roles.n_sc,
                roles.n_symbols
            ));
        }
        Ok(ResourceGrid { cells, roles })
    }

    pub fn n_sc(&self) -> usize {
        self.roles.n_sc
    }

    pub fn n_symbols(&self) -> usize {
        self.roles.n_symbols
    }

    pub fn roles(&self) -> &RoleMatrix {
        &self.roles
    }

    pub fn cells(&self) -> &[C64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [C64] {
        &mut self.cells
    }

    #[inline]
    pub fn get(&self, sc: usize, sym: usize) -> C64 {
        self.cells[self.roles.index(sc, sym)]
    }

    #[inline]
    pub fn set(&mut self, sc: usize, sym: usize, value: C64) {
        let i = self.roles.index(sc, sym);
        self.cells[i] = value;
    }

    pub fn column(&self, sym: usize) -> &[C64] {
        let n = self.roles.n_sc;
        &self.cells[sym * n..(sym + 1) * n]
    }

    /// Force guard and null cells to zero.
    pub fn clear_unused(&mut self) {
        for (c, r) in self.cells.iter_mut().zip(self.roles.roles.iter()) {
            if !r.carries_signal() {
                *c = C64::new(0.0, 0.0);
            }
        }
    }

    /// Total energy over all cells.
    pub fn energy(&self) -> f64 {
        self.cells.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// OFDM modulator/demodulator with cached FFT plans.
#[derive(Clone)]
pub struct OfdmModem {
    cfg: OfdmConfig,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmModem").field("cfg", &self.cfg).finish()
    }
}

impl OfdmModem {
    pub fn new(cfg: OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(cfg.n_sc);
        let fft = planner.plan_fft_forward(cfg.n_sc);
        let scale = 1.0 / (cfg.n_sc as f64).sqrt();
        Ok(OfdmModem {
            cfg,
            ifft,
            fft,
            scale,
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    fn check_shape(&self, n_sc: usize, n_symbols: usize) -> Result<()> {
        if n_sc != self.cfg.n_sc {
            return invalid(format!(
                "grid has {n_sc} subcarriers, modem expects {}",
                self.cfg.n_sc
            ));
        }
        if n_symbols == 0 || !n_symbols.is_multiple_of(self.cfg.symbols_per_unit) {
            return invalid(format!(
                "grid has {n_symbols} symbols, expected a positive multiple of {}",
                self.cfg.symbols_per_unit
            ));
        }
        Ok(())
    }

    /// Modulate every column, prepending its cyclic prefix.
    pub fn modulate(&self, grid: &ResourceGrid) -> Result<Vec<C64>> {
        self.modulate_with(grid, true)
    }

    /// Like [`OfdmModem::modulate`]; with `fill_cp == false` the prefix
    /// samples are left at zero (a transmitter that puts no power there).
    pub fn modulate_with(&self, grid: &ResourceGrid, fill_cp: bool) -> Result<Vec<C64>> {
        self.check_shape(grid.n_sc(), grid.n_symbols())?;
        let n = self.cfg.n_sc;
        let mut out = Vec::with_capacity(self.cfg.samples_for(grid.n_symbols()));
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];
        for sym in 0..grid.n_symbols() {
            buf.copy_from_slice(grid.column(sym));
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for x in buf.iter_mut() {
                *x *= self.scale;
            }
            let cp = self.cfg.cp_len(sym);
            if fill_cp {
                out.extend_from_slice(&buf[n - cp..]);
            } else {
                out.extend(std::iter::repeat_n(C64::new(0.0, 0.0), cp));
            }
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    /// Strip prefixes and transform back to a grid with the given roles.
    /// Guard and null cells of the result are zero.
    pub fn demodulate(&self, samples: &[C64], roles: &RoleMatrix) -> Result<ResourceGrid> {
        self.check_shape(roles.n_sc(), roles.n_symbols())?;
        let expected = self.cfg.samples_for(roles.n_symbols());
        if samples.len() != expected {
            return invalid(format!("{} samples supplied, {expected} expected", samples.len()));
        }
        let n = self.cfg.n_sc;
        let mut cells = Vec::with_capacity(roles.len());
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut pos = 0;
        for sym in 0..roles.n_symbols() {
            pos += self.cfg.cp_len(sym);
            buf.copy_from_slice(&samples[pos..pos + n]);
            pos += n;
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            cells.extend(buf.iter().map(|x| x * self.scale));
        }
        let mut grid = ResourceGrid::from_parts(cells, roles.clone())?;
        grid.clear_unused();
        Ok(grid)
    }
}

/// One-shot modulation; builds a modem for `cfg`.
pub fn ofdm_modulate(grid: &ResourceGrid, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    OfdmModem::new(cfg.clone())?.modulate(grid)
}

/// One-shot demodulation with roles taken from `cfg`. The symbol count is
/// inferred from the sample count, which must cover whole units.
pub fn ofdm_demodulate(samples: &[C64], cfg: &OfdmConfig) -> Result<ResourceGrid> {
    let unit = cfg.samples_for(cfg.symbols_per_unit);
    if unit == 0 || !samples.len().is_multiple_of(unit) || samples.is_empty() {
        return invalid(format!(
            "{} samples is not a whole number of {unit}-sample units",
            samples.len()
        ));
    }
    let n_symbols = samples.len() / unit * cfg.symbols_per_unit;
    OfdmModem::new(cfg.clone())?.demodulate(samples, &cfg.role_matrix(n_symbols))
}
