use super::{Demapper, LlrBlock};
use crate::error::{invalid, Result};
use crate::grid::{map_bits, ModulationScheme, OfdmConfig, ReRole, ResourceGrid, RoleMatrix};
use crate::C64;

/// Noise variance (per real dimension) seen by each resource element.
#[derive(Debug, Clone, Copy)]
pub enum NoiseVar<'a> {
    Scalar(f64),
    /// Indexed by flat grid index; `INFINITY` marks an erasure.
    PerRe(&'a [f64]),
}

impl NoiseVar<'_> {
    #[inline]
    fn at(&self, idx: usize) -> f64 {
        match self {
            NoiseVar::Scalar(v) => *v,
            NoiseVar::PerRe(v) => v[idx],
        }
    }
}

/// Placement of codewords onto data resource elements.
///
/// Codeword bits are grouped into symbols and written to data elements in
/// frequency-first order; extraction walks the same positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordLayout {
    bits_per_codeword: usize,
    bits_per_symbol: usize,
    codewords: Vec<Vec<usize>>,
    filler: Vec<usize>,
}

fn data_positions(roles: &RoleMatrix, sym: usize, order: &[usize]) -> Vec<usize> {
    order
        .iter()
        .filter(|&&sc| roles.get(sc, sym) == ReRole::Data)
        .map(|&sc| roles.index(sc, sym))
        .collect()
}

fn res_per_codeword(n: usize, bps: usize) -> Result<usize> {
    if bps == 0 || n == 0 || !n.is_multiple_of(bps) {
        return invalid(format!(
            "codeword length {n} is not a multiple of {bps} bits per symbol"
        ));
    }
    Ok(n / bps)
}

impl CodewordLayout {
    /// `per_symbol` codewords inside every OFDM symbol; codewords never
    /// straddle symbols. Unused data elements become filler.
    pub fn per_symbol(
        roles: &RoleMatrix,
        data_order: &[usize],
        n: usize,
        bps: usize,
        per_symbol: usize,
    ) -> Result<Self> {
        let per_cw = res_per_codeword(n, bps)?;
        let mut codewords = Vec::new();
        let mut filler = Vec::new();
        for sym in 0..roles.n_symbols() {
            let pos = data_positions(roles, sym, data_order);
            if per_symbol * per_cw > pos.len() {
                return invalid(format!(
                    "{per_symbol} codewords of {n} bits need {} elements, symbol {sym} has {}",
                    per_symbol * per_cw,
                    pos.len()
                ));
            }
            for chunk in pos[..per_symbol * per_cw].chunks_exact(per_cw) {
                codewords.push(chunk.to_vec());
            }
            filler.extend_from_slice(&pos[per_symbol * per_cw..]);
        }
        Ok(CodewordLayout {
            bits_per_codeword: n,
            bits_per_symbol: bps,
            codewords,
            filler,
        })
    }

    /// As many codewords as fit, tiled frequency-first across the whole grid
    /// (codewords may straddle symbols).
    pub fn tiled(roles: &RoleMatrix, data_order: &[usize], n: usize, bps: usize) -> Result<Self> {
        let per_cw = res_per_codeword(n, bps)?;
        let pos: Vec<usize> = (0..roles.n_symbols())
            .flat_map(|sym| data_positions(roles, sym, data_order))
            .collect();
        let count = pos.len() / per_cw;
        if count == 0 {
            return invalid("grid too small for a single codeword");
        }
        Ok(CodewordLayout {
            bits_per_codeword: n,
            bits_per_symbol: bps,
            codewords: pos[..count * per_cw]
                .chunks_exact(per_cw)
                .map(<[usize]>::to_vec)
                .collect(),
            filler: pos[count * per_cw..].to_vec(),
        })
    }

    pub fn count(&self) -> usize {
        self.codewords.len()
    }

    /// Keep the first `count` codewords; the rest become filler.
    pub fn truncate(&mut self, count: usize) -> Result<()> {
        if count == 0 || count > self.codewords.len() {
            return invalid(format!(
                "cannot keep {count} of {} codewords",
                self.codewords.len()
            ));
        }
        for cw in self.codewords.drain(count..) {
            self.filler.extend(cw);
        }
        Ok(())
    }

    pub fn positions(&self, codeword: usize) -> &[usize] {
        &self.codewords[codeword]
    }

    pub fn filler(&self) -> &[usize] {
        &self.filler
    }

    /// Write `codewords` (at most [`CodewordLayout::count`]) into the grid.
    pub fn map_codewords(
        &self,
        grid: &mut ResourceGrid,
        codewords: &[Vec<u8>],
        scheme: ModulationScheme,
    ) -> Result<()> {
        if codewords.len() > self.count() {
            return invalid(format!(
                "{} codewords exceed the layout capacity of {}",
                codewords.len(),
                self.count()
            ));
        }
        if scheme.bits_per_symbol() != Some(self.bits_per_symbol) {
            return invalid(format!(
                "layout built for {} bits per symbol",
                self.bits_per_symbol
            ));
        }
        let cells = grid.cells_mut();
        for (cw, pos) in codewords.iter().zip(&self.codewords) {
            if cw.len() != self.bits_per_codeword {
                return invalid(format!(
                    "codeword has {} bits, expected {}",
                    cw.len(),
                    self.bits_per_codeword
                ));
            }
            for (sym, &p) in map_bits(cw, scheme)?.into_iter().zip(pos) {
                cells[p] = sym;
            }
        }
        Ok(())
    }

    /// LLRs of codeword `i`, demapped from grid cells.
    pub fn codeword_llrs(
        &self,
        i: usize,
        cells: &[C64],
        demapper: &Demapper,
        amp: f64,
        noise: NoiseVar<'_>,
    ) -> LlrBlock {
        let mut out = Vec::with_capacity(self.bits_per_codeword);
        for &p in &self.codewords[i] {
            demapper.push(cells[p], amp, noise.at(p), &mut out);
        }
        LlrBlock::from_finite(out)
    }

    pub fn extract_llrs(
        &self,
        cells: &[C64],
        demapper: &Demapper,
        amp: f64,
        noise: NoiseVar<'_>,
    ) -> Vec<LlrBlock> {
        (0..self.count())
            .map(|i| self.codeword_llrs(i, cells, demapper, amp, noise))
            .collect()
    }
}

/// Fill the grid symbol by symbol, as many whole codewords per symbol as
/// its data subcarriers hold.
pub fn map_codewords_to_grid(
    codewords: &[Vec<u8>],
    grid: &mut ResourceGrid,
    cfg: &OfdmConfig,
    scheme: ModulationScheme,
) -> Result<CodewordLayout> {
    let layout = per_symbol_layout(codewords.first().map_or(0, Vec::len), grid.roles(), cfg, scheme)?;
    layout.map_codewords(grid, codewords, scheme)?;
    Ok(layout)
}

/// Inverse of [`map_codewords_to_grid`] for `n`-bit codewords.
pub fn extract_llrs_from_grid(
    rx: &ResourceGrid,
    cfg: &OfdmConfig,
    scheme: ModulationScheme,
    n: usize,
    amp: f64,
    noise_var: f64,
) -> Result<Vec<LlrBlock>> {
    let layout = per_symbol_layout(n, rx.roles(), cfg, scheme)?;
    let demapper = Demapper::new(scheme)?;
    Ok(layout.extract_llrs(rx.cells(), &demapper, amp, NoiseVar::Scalar(noise_var)))
}

fn per_symbol_layout(
    n: usize,
    roles: &RoleMatrix,
    cfg: &OfdmConfig,
    scheme: ModulationScheme,
) -> Result<CodewordLayout> {
    let Some(bps) = scheme.bits_per_symbol() else {
        return invalid("awgn scheme carries no bits");
    };
    let per_cw = res_per_codeword(n, bps)?;
    let per_symbol = cfg.data_subcarriers.len() / per_cw;
    CodewordLayout::per_symbol(roles, &cfg.data_subcarriers, n, bps, per_symbol)
}
