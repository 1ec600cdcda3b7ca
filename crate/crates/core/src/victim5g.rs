//! PDSCH-like downlink slot link with DMRS-based estimation and HARQ.
//!
//! A slot is 14 OFDM symbols on a 1024-point FFT with 612 occupied
//! subcarriers. DMRS pilots sit on every `dmrs_stride`-th occupied
//! subcarrier of the DMRS symbols; the remaining occupied elements carry
//! 16QAM-mapped LDPC codewords tiled frequency-first. The receiver estimates
//! the channel by least squares at the pilots and equalizes with it, so
//! jamming the pilots corrupts every codeword of the slot.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelConfig};
use crate::error::{invalid, Result};
use crate::fec::{decode_batch, CodewordLayout, Demapper, LdpcCode, LlrBlock, NoiseVar};
use crate::grid::{map_bits, ModulationScheme, OfdmConfig, OfdmModem, ReRole, ResourceGrid, RoleMatrix};
use crate::jammer::{generate_jamming_grid, JammerAction};
use crate::rng::{random_bits, SimRng};
use crate::C64;

const PILOT_SEED: u64 = 0xd3a5_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarqConfig {
    pub enabled: bool,
    pub max_retransmissions: usize,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig {
            enabled: true,
            max_retransmissions: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlotConfig {
    pub n_fft: usize,
    pub n_data_sc: usize,
    pub guard_each_side: usize,
    /// Cyclic prefix per symbol; its length sets the symbols per slot.
    pub cp_pattern: Vec<usize>,
    pub dmrs_symbols: Vec<usize>,
    pub dmrs_stride: usize,
    pub scheme: ModulationScheme,
    pub frames_per_step: usize,
    pub slots_per_frame: usize,
    pub harq: HarqConfig,
    pub max_iters: usize,
    /// Codewords carried per slot; `None` fills the slot. Unused data
    /// elements carry random filler symbols.
    pub codewords_per_slot: Option<usize>,
}

impl Default for SlotConfig {
    fn default() -> Self {
        let mut cp_pattern = vec![72; 14];
        cp_pattern[0] = 80;
        cp_pattern[7] = 80;
        SlotConfig {
            n_fft: 1024,
            n_data_sc: 612,
            guard_each_side: 206,
            cp_pattern,
            dmrs_symbols: vec![2],
            dmrs_stride: 2,
            scheme: ModulationScheme::Qam16,
            frames_per_step: 4,
            slots_per_frame: 1,
            harq: HarqConfig::default(),
            max_iters: crate::fec::DEFAULT_MAX_ITERS,
            codewords_per_slot: None,
        }
    }
}

impl SlotConfig {
    pub fn symbols_per_slot(&self) -> usize {
        self.cp_pattern.len()
    }

    pub fn slots_per_step(&self) -> usize {
        self.frames_per_step * self.slots_per_frame
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data_sc == 0 || self.n_data_sc + 2 * self.guard_each_side > self.n_fft {
            return invalid(format!(
                "{} data + 2x{} guard subcarriers do not fit a {}-point FFT",
                self.n_data_sc, self.guard_each_side, self.n_fft
            ));
        }
        if !self.n_data_sc.is_multiple_of(2) {
            return invalid("occupied subcarrier count must be even");
        }
        if self.dmrs_symbols.is_empty() || self.dmrs_stride == 0 {
            return invalid("at least one DMRS symbol and a positive stride are required");
        }
        if self.dmrs_symbols.iter().any(|&s| s >= self.symbols_per_slot()) {
            return invalid("DMRS symbol outside the slot");
        }
        if self.scheme.bits_per_symbol().is_none() {
            return invalid("victim scheme must carry bits");
        }
        if self.slots_per_step() == 0 || self.max_iters == 0 || self.codewords_per_slot == Some(0) {
            return invalid(
                "frames_per_step, slots_per_frame, max_iters and codewords_per_slot must be positive",
            );
        }
        Ok(())
    }

    /// Occupied subcarriers centred on DC, listed in ascending frequency;
    /// guards fill the band edges.
    pub fn ofdm_config(&self) -> OfdmConfig {
        let n = self.n_fft;
        let half = self.n_data_sc / 2;
        let mut data: Vec<usize> = (n - half..n).collect();
        data.extend(0..half);
        let mut guard: Vec<usize> = (half..half + self.guard_each_side).collect();
        guard.extend(n - half - self.guard_each_side..n - half);
        OfdmConfig {
            n_sc: n,
            data_subcarriers: data,
            guard_band: guard,
            center_null: None,
            cp_lengths: self.cp_pattern.clone(),
            symbols_per_unit: self.symbols_per_slot(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Per-element gain (zero outside data and DMRS elements).
    pub h: Vec<C64>,
    /// Complex noise variance estimated from pilot residuals.
    pub noise_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<C64>,
    /// Complex noise variance per element after equalization; infinite
    /// where the gain estimate vanished.
    pub noise_var: Vec<f64>,
    pub erasures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkStepResult {
    /// Final outcome per codeword chain (`true` = ACK).
    pub acks: Vec<bool>,
    pub true_bler: f64,
    pub llr_samples: Option<Vec<f64>>,
    /// Slots simulated, including retransmission flushes.
    pub slots: usize,
    pub erasures: usize,
}

struct Chain {
    codeword: Vec<u8>,
    llrs: Option<LlrBlock>,
    attempts: usize,
    id: usize,
}

/// The victim link: fixed slot geometry, code and pilot sequence.
#[derive(Debug, Clone)]
pub struct VictimLink {
    cfg: SlotConfig,
    code: Arc<LdpcCode>,
    modem: OfdmModem,
    roles: RoleMatrix,
    layout: CodewordLayout,
    demapper: Demapper,
    /// Occupied subcarriers in ascending frequency.
    data_order: Vec<usize>,
    /// Per DMRS symbol: (position in `data_order`, flat index, pilot).
    pilots: Vec<Vec<(usize, usize, C64)>>,
    /// DMRS symbol serving each symbol.
    nearest_dmrs: Vec<usize>,
    collect_llrs: bool,
}

impl VictimLink {
    pub fn new(cfg: SlotConfig, code: Arc<LdpcCode>) -> Result<Self> {
        cfg.validate()?;
        let ofdm = cfg.ofdm_config();
        let modem = OfdmModem::new(ofdm.clone())?;
        let n_sym = cfg.symbols_per_slot();
        let mut roles = ofdm.role_matrix(n_sym);
        let data_order = ofdm.data_subcarriers.clone();
        let pilot_points = ModulationScheme::Qpsk.constellation()?;
        let mut pilot_rng = SimRng::seed_from_u64(PILOT_SEED);
        let mut pilots = Vec::new();
        for &sym in &cfg.dmrs_symbols {
            let mut row = Vec::new();
            for (q, &sc) in data_order.iter().enumerate().step_by(cfg.dmrs_stride) {
                roles.set(sc, sym, ReRole::Dmrs);
                let p = pilot_points[pilot_rng.random_range(0..4)];
                row.push((q, roles.index(sc, sym), p));
            }
            pilots.push(row);
        }
        let nearest_dmrs = (0..n_sym)
            .map(|s| {
                (0..cfg.dmrs_symbols.len())
                    .min_by_key(|&i| cfg.dmrs_symbols[i].abs_diff(s))
                    .expect("validated non-empty")
            })
            .collect();
        let bps = cfg.scheme.bits_per_symbol().expect("validated");
        let mut layout = CodewordLayout::tiled(&roles, &data_order, code.n(), bps)?;
        if let Some(k) = cfg.codewords_per_slot {
            layout.truncate(k)?;
        }
        let demapper = Demapper::new(cfg.scheme)?;
        Ok(VictimLink {
            cfg,
            code,
            modem,
            roles,
            layout,
            demapper,
            data_order,
            pilots,
            nearest_dmrs,
            collect_llrs: false,
        })
    }

    /// Link with the default slot and the default rate-0.54 code.
    pub fn nr_default(cfg: SlotConfig) -> Result<Self> {
        VictimLink::new(cfg, Arc::new(LdpcCode::nr_default()))
    }

    /// Keep equalized LLRs of first transmissions in the step result.
    pub fn with_llr_samples(mut self, on: bool) -> Self {
        self.collect_llrs = on;
        self
    }

    pub fn config(&self) -> &SlotConfig {
        &self.cfg
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn roles(&self) -> &RoleMatrix {
        &self.roles
    }

    pub fn layout(&self) -> &CodewordLayout {
        &self.layout
    }

    pub fn codewords_per_slot(&self) -> usize {
        self.layout.count()
    }

    /// Known pilot of every DMRS element as `(flat index, pilot)`.
    pub fn pilots(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.pilots.iter().flatten().map(|&(_, i, p)| (i, p))
    }

    /// Place pilots and codewords; codeword slots left empty and filler
    /// elements get random symbols so every data element carries power.
    pub fn build_slot<R: Rng + ?Sized>(&self, codewords: &[Vec<u8>], rng: &mut R) -> Result<ResourceGrid> {
        let mut grid = ResourceGrid::zeros(self.roles.clone());
        self.layout.map_codewords(&mut grid, codewords, self.cfg.scheme)?;
        let bps = self.cfg.scheme.bits_per_symbol().expect("validated");
        let unused: Vec<usize> = (codewords.len()..self.layout.count())
            .flat_map(|i| self.layout.positions(i).iter().copied())
            .chain(self.layout.filler().iter().copied())
            .collect();
        let filler = map_bits(&random_bits(rng, unused.len() * bps), self.cfg.scheme)?;
        let cells = grid.cells_mut();
        for (&p, s) in unused.iter().zip(filler) {
            cells[p] = s;
        }
        for (i, p) in self.pilots() {
            cells[i] = p;
        }
        Ok(grid)
    }

    /// Pass a slot through jammer and channel and return the received grid.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        slot: &ResourceGrid,
        jam: Option<&JammerAction>,
        chan: &ChannelConfig,
        rng: &mut R,
    ) -> Result<ResourceGrid> {
        let tx = self.modem.modulate(slot)?;
        let jam_samples = match jam {
            Some(action) => {
                let g = generate_jamming_grid(action, chan, &self.roles, rng)?;
                self.modem.modulate_with(&g, false)?
            }
            None => vec![C64::new(0.0, 0.0); tx.len()],
        };
        let rx = apply_channel(&tx, &jam_samples, chan, rng)?;
        self.modem.demodulate(&rx, &self.roles)
    }

    /// Least squares at the pilots, linear interpolation across occupied
    /// subcarriers, nearest DMRS symbol across time. The noise variance is
    /// the pilot residual power around a three-tap moving average of the raw
    /// estimates, corrected for the window's own noise.
    pub fn estimate_channel(&self, rx: &ResourceGrid) -> ChannelEstimate {
        let cells = rx.cells();
        let n_sc = self.roles.n_sc();
        let mut h = vec![C64::new(0.0, 0.0); cells.len()];
        let mut resid = 0.0;
        let mut count = 0usize;
        let per_dmrs: Vec<Vec<C64>> = self
            .pilots
            .iter()
            .map(|row| {
                let ls: Vec<C64> = row.iter().map(|&(_, i, p)| cells[i] / p).collect();
                for j in 0..ls.len() {
                    let lo = j.saturating_sub(1);
                    let hi = (j + 1).min(ls.len() - 1);
                    let w = (hi - lo + 1) as f64;
                    if w < 2.0 {
                        continue;
                    }
                    let avg = ls[lo..=hi].iter().sum::<C64>() / w;
                    resid += (ls[j] - avg).norm_sqr() / (1.0 - 1.0 / w);
                    count += 1;
                }
                self.interpolate(row, &ls)
            })
            .collect();
        for sym in 0..self.roles.n_symbols() {
            let line = &per_dmrs[self.nearest_dmrs[sym]];
            for (q, &sc) in self.data_order.iter().enumerate() {
                h[sym * n_sc + sc] = line[q];
            }
        }
        ChannelEstimate {
            h,
            noise_var: if count > 0 { resid / count as f64 } else { 0.0 },
        }
    }

    /// Gains for every occupied subcarrier from pilot estimates.
    fn interpolate(&self, row: &[(usize, usize, C64)], ls: &[C64]) -> Vec<C64> {
        let mut line = vec![C64::new(0.0, 0.0); self.data_order.len()];
        let first = row[0].0;
        let last = row[row.len() - 1].0;
        for (q, v) in line.iter_mut().enumerate() {
            *v = if q <= first {
                ls[0]
            } else if q >= last {
                ls[ls.len() - 1]
            } else {
                let k = row.partition_point(|&(pq, _, _)| pq <= q) - 1;
                let (q0, q1) = (row[k].0, row[k + 1].0);
                let t = (q - q0) as f64 / (q1 - q0) as f64;
                ls[k] * (1.0 - t) + ls[k + 1] * t
            };
        }
        line
    }

    /// Zero-forcing on data elements.
    pub fn equalize(&self, rx: &ResourceGrid, est: &ChannelEstimate) -> Equalized {
        equalize(rx, &est.h, est.noise_var)
    }

    /// One bandit step: `slots_per_step` slots of fresh codewords, with
    /// failed codewords retransmitted in later slots (extra slots are run
    /// until every chain has finished). A fresh jamming mask and phase are
    /// drawn for every slot.
    pub fn run_link_step<R: Rng + ?Sized>(
        &self,
        jam: Option<&JammerAction>,
        chan: &ChannelConfig,
        rng: &mut R,
    ) -> Result<LinkStepResult> {
        let per_slot = self.layout.count();
        let total = self.cfg.slots_per_step() * per_slot;
        let max_attempts = 1 + if self.cfg.harq.enabled {
            self.cfg.harq.max_retransmissions
        } else {
            0
        };
        let mut acks = vec![false; total];
        let mut next_id = 0;
        let mut pending: Vec<Chain> = Vec::new();
        let mut slots = 0;
        let mut erasures = 0;
        let mut samples = self.collect_llrs.then(Vec::new);

        while next_id < total || !pending.is_empty() {
            let mut batch: Vec<Chain> = pending.drain(..pending.len().min(per_slot)).collect();
            while batch.len() < per_slot && next_id < total {
                let info = random_bits(rng, self.code.k());
                batch.push(Chain {
                    codeword: self.code.encode(&info)?,
                    llrs: None,
                    attempts: 0,
                    id: next_id,
                });
                next_id += 1;
            }
            let words: Vec<Vec<u8>> = batch.iter().map(|c| c.codeword.clone()).collect();
            let slot = self.build_slot(&words, rng)?;
            let rx = self.transmit(&slot, jam, chan, rng)?;
            let est = self.estimate_channel(&rx);
            let eq = self.equalize(&rx, &est);
            erasures += eq.erasures;
            let per_dim: Vec<f64> = eq.noise_var.iter().map(|v| 0.5 * v).collect();
            slots += 1;

            for (i, chain) in batch.iter_mut().enumerate() {
                let fresh =
                    self.layout
                        .codeword_llrs(i, &eq.symbols, &self.demapper, 1.0, NoiseVar::PerRe(&per_dim));
                if let (Some(s), 0) = (samples.as_mut(), chain.attempts) {
                    s.extend_from_slice(fresh.as_slice());
                }
                match chain.llrs.as_mut() {
                    Some(stored) => stored.combine(&fresh),
                    None => chain.llrs = Some(fresh),
                }
                chain.attempts += 1;
            }
            let blocks: Vec<&[f64]> = batch
                .iter()
                .map(|c| c.llrs.as_ref().expect("set above").as_slice())
                .collect();
            let decoded = decode_batch(&blocks, &self.code, self.cfg.max_iters);
            for (chain, out) in batch.into_iter().zip(decoded) {
                // The transport-block CRC catches convergence to a wrong codeword.
                let ok = out.success && out.bits == chain.codeword;
                if ok || chain.attempts >= max_attempts {
                    acks[chain.id] = ok;
                } else {
                    pending.push(chain);
                }
            }
        }
        let nacks = acks.iter().filter(|&&a| !a).count();
        Ok(LinkStepResult {
            true_bler: nacks as f64 / total as f64,
            acks,
            llr_samples: samples,
            slots,
            erasures,
        })
    }
}

/// Divide each signal element by its gain estimate. Elements whose gain is
/// below 1e-12 become erasures (zero symbol, infinite noise variance).
pub fn equalize(rx: &ResourceGrid, h_est: &[C64], noise_var: f64) -> Equalized {
    let mut erasures = 0;
    let mut symbols = vec![C64::new(0.0, 0.0); rx.cells().len()];
    let mut nv = vec![f64::INFINITY; rx.cells().len()];
    for (i, (&y, role)) in rx.cells().iter().zip(rx.roles().as_slice()).enumerate() {
        if *role != ReRole::Data {
            continue;
        }
        let h = h_est[i];
        let g = h.norm_sqr();
        if g.sqrt() < 1e-12 {
            erasures += 1;
            continue;
        }
        symbols[i] = y / h;
        nv[i] = noise_var / g;
    }
    Equalized {
        symbols,
        noise_var: nv,
        erasures,
    }
}
