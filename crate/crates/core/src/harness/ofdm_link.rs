//! The BPSK coded-OFDM link used by the BLER sweep and LLR statistics.

use std::sync::Arc;

use rand::Rng;

use super::config::{LlrSource, NoiseModel};
use crate::channel::{apply_channel, ChannelConfig};
use crate::error::Result;
use crate::fec::{decode_batch, CodewordLayout, Demapper, LdpcCode, NoiseVar};
use crate::grid::{ModulationScheme, OfdmConfig, OfdmModem, ReRole, ResourceGrid, RoleMatrix};
use crate::jammer::{generate_jamming_grid, JammerAction};
use crate::rng::random_bits;
use crate::C64;

/// OFDM symbols per simulated frame. Symbol and subcarrier masks are drawn
/// once per frame.
pub const SYMBOLS_PER_FRAME: usize = 10;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutcome {
    /// Decode success per codeword.
    pub success: Vec<bool>,
    /// Sign-corrected LLRs (positive = correct decision), when requested.
    pub llrs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CodedOfdmLink {
    modem: OfdmModem,
    code: Arc<LdpcCode>,
    roles: RoleMatrix,
    layout: CodewordLayout,
    demapper: Demapper,
    max_iters: usize,
    noise_model: NoiseModel,
}

impl CodedOfdmLink {
    pub fn new(code: Arc<LdpcCode>, max_iters: usize, noise_model: NoiseModel) -> Result<Self> {
        let cfg = OfdmConfig::coded_ofdm(SYMBOLS_PER_FRAME);
        let roles = cfg.role_matrix(SYMBOLS_PER_FRAME);
        let per_symbol = cfg.data_subcarriers.len() / code.n();
        let layout = CodewordLayout::per_symbol(&roles, &cfg.data_subcarriers, code.n(), 1, per_symbol)?;
        Ok(CodedOfdmLink {
            modem: OfdmModem::new(cfg)?,
            code,
            roles,
            layout,
            demapper: Demapper::new(ModulationScheme::Bpsk)?,
            max_iters,
            noise_model,
        })
    }

    pub fn codewords_per_frame(&self) -> usize {
        self.layout.count()
    }

    pub fn roles(&self) -> &RoleMatrix {
        &self.roles
    }

    /// Transmit one frame of random codewords and decode it.
    pub fn run_frame<R: Rng + ?Sized>(
        &self,
        jam: Option<&JammerAction>,
        chan: &ChannelConfig,
        collect: Option<LlrSource>,
        rng: &mut R,
    ) -> Result<FrameOutcome> {
        let words: Vec<Vec<u8>> = (0..self.layout.count())
            .map(|_| self.code.encode(&random_bits(rng, self.code.k())))
            .collect::<Result<_>>()?;
        let mut grid = ResourceGrid::zeros(self.roles.clone());
        self.layout
            .map_codewords(&mut grid, &words, ModulationScheme::Bpsk)?;
        let tx = self.modem.modulate(&grid)?;
        let jam_samples = match jam {
            Some(a) => {
                let g = generate_jamming_grid(a, chan, &self.roles, rng)?;
                self.modem.modulate_with(&g, false)?
            }
            None => vec![C64::new(0.0, 0.0); tx.len()],
        };
        let rx = self
            .modem
            .demodulate(&apply_channel(&tx, &jam_samples, chan, rng)?, &self.roles)?;
        let noise = self.noise_per_dimension(&rx, chan);
        let amp = chan.p_v().sqrt();

        let llrs: Vec<_> = (0..words.len())
            .map(|i| {
                self.layout
                    .codeword_llrs(i, rx.cells(), &self.demapper, amp, NoiseVar::PerRe(&noise))
            })
            .collect();
        let blocks: Vec<&[f64]> = llrs.iter().map(|l| l.as_slice()).collect();
        let decoded = decode_batch(&blocks, &self.code, self.max_iters);

        let mut out = FrameOutcome::default();
        let signed = |l: f64, b: u8| if b == 0 { l } else { -l };
        for ((word, llrs), dec) in words.iter().zip(&blocks).zip(&decoded) {
            // Genie CRC: convergence to another codeword is a block error.
            out.success.push(dec.success && dec.bits == *word);
            match collect {
                Some(LlrSource::Channel) => out
                    .llrs
                    .extend(llrs.iter().zip(word).map(|(&l, &b)| signed(l, b))),
                Some(LlrSource::Decoded) => out
                    .llrs
                    .extend(dec.app.iter().zip(word).map(|(&l, &b)| signed(l as f64, b))),
                None => {}
            }
        }
        Ok(out)
    }

    /// Per-dimension noise variance assumed for every element.
    fn noise_per_dimension(&self, rx: &ResourceGrid, chan: &ChannelConfig) -> Vec<f64> {
        let thermal = 0.5 * chan.sigma2;
        match self.noise_model {
            NoiseModel::Thermal => vec![thermal; rx.cells().len()],
            NoiseModel::PerSymbol => {
                let n_sc = rx.n_sc();
                let p_v = chan.p_v();
                let mut nv = vec![thermal; rx.cells().len()];
                for sym in 0..rx.n_symbols() {
                    let (sum, count) = rx
                        .column(sym)
                        .iter()
                        .zip(self.roles.column(sym))
                        .filter(|(_, &r)| r == ReRole::Data)
                        .fold((0.0, 0usize), |(s, n), (c, _)| (s + c.norm_sqr(), n + 1));
                    let est = (sum / count as f64 - p_v).max(chan.sigma2);
                    nv[sym * n_sc..(sym + 1) * n_sc].fill(0.5 * est);
                }
                nv
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jammer::JammingMethod;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn link(model: NoiseModel) -> CodedOfdmLink {
        CodedOfdmLink::new(Arc::new(LdpcCode::coded_ofdm_default()), 25, model).unwrap()
    }

    #[test]
    fn frame_geometry() {
        let l = link(NoiseModel::Thermal);
        assert_eq!(l.codewords_per_frame(), 2 * SYMBOLS_PER_FRAME);
    }

    #[test]
    fn clean_link_decodes_and_llrs_are_positive() {
        let l = link(NoiseModel::Thermal);
        let mut rng = SimRng::seed_from_u64(1);
        let chan = ChannelConfig::new(12.0, f64::NEG_INFINITY).coherent(true);
        let out = l
            .run_frame(None, &chan, Some(LlrSource::Channel), &mut rng)
            .unwrap();
        assert!(out.success.iter().all(|&s| s));
        assert_eq!(out.llrs.len(), 20 * 162);
        let wrong = out.llrs.iter().filter(|&&x| x < 0.0).count();
        assert!(wrong < 5);
    }

    #[test]
    fn full_power_jamming_breaks_low_snr_link() {
        let l = link(NoiseModel::PerSymbol);
        let mut rng = SimRng::seed_from_u64(2);
        let chan = ChannelConfig::new(8.0, 10.0).coherent(true);
        let a = JammerAction::new(ModulationScheme::Awgn, 1.0, JammingMethod::Subcarrier).unwrap();
        let out = l
            .run_frame(Some(&a), &chan, Some(LlrSource::Decoded), &mut rng)
            .unwrap();
        assert!(out.success.iter().all(|&s| !s));
    }
}
