use wide::bytemuck::cast;
use wide::{f32x8, i32x8, u32x8};

use super::{LdpcCode, LlrBlock};

/// Scaling applied to check-node messages (normalized min-sum).
pub const MIN_SUM_NORMALIZATION: f32 = 0.75;
pub const DEFAULT_MAX_ITERS: usize = 25;

/// Result of one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Final hard decisions (`app < 0` decides 1).
    pub bits: Vec<u8>,
    /// All checks satisfied and no undecided (zero) posterior LLR.
    pub success: bool,
    /// Iterations run; 0 when the channel decisions were already a codeword.
    pub iterations: usize,
    /// Posterior LLRs at termination.
    pub app: Vec<f32>,
}

/// Normalized min-sum belief propagation with a flooding schedule.
///
/// Working memory is allocated per call, so one [`LdpcCode`] can be shared
/// by concurrent decoders.
pub fn ldpc_decode(llrs: &LlrBlock, code: &LdpcCode, max_iters: usize) -> DecodeOutput {
    decode_slice(llrs.as_slice(), code, max_iters)
}

pub(crate) fn decode_slice(llrs: &[f64], code: &LdpcCode, max_iters: usize) -> DecodeOutput {
    assert_eq!(llrs.len(), code.n(), "LLR block length must equal n");
    let (check_start, edge_var) = code.csr();
    let channel: Vec<f32> = llrs.iter().map(|&x| x as f32).collect();
    let mut app = channel.clone();
    let mut next = vec![0f32; code.n()];
    let mut msgs = vec![0f32; edge_var.len()];

    if converged(&app, check_start, edge_var) {
        return finish(app, true, 0);
    }
    let max_degree = check_start.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    let mut q = vec![0f32; max_degree as usize];
    for iteration in 1..=max_iters {
        next.copy_from_slice(&channel);
        for c in 0..check_start.len() - 1 {
            let (s, e) = (check_start[c] as usize, check_start[c + 1] as usize);
            let q = &mut q[..e - s];
            let vars = &edge_var[s..e];
            let msgs = &mut msgs[s..e];
            let mut min1 = f32::INFINITY;
            let mut min2 = f32::INFINITY;
            let mut min_at = 0;
            let mut parity = 0u32;
            for (j, ((qj, &v), &m)) in q.iter_mut().zip(vars).zip(msgs.iter()).enumerate() {
                let x = app[v as usize] - m;
                *qj = x;
                let mag = x.abs();
                parity ^= x.to_bits();
                let lt1 = mag < min1;
                min_at = if lt1 { j } else { min_at };
                min2 = if lt1 {
                    min1
                } else if mag < min2 {
                    mag
                } else {
                    min2
                };
                min1 = if lt1 { mag } else { min1 };
            }
            let min1 = MIN_SUM_NORMALIZATION * min1;
            let min2 = MIN_SUM_NORMALIZATION * min2;
            for (j, ((m, &v), &qj)) in msgs.iter_mut().zip(vars).zip(q.iter()).enumerate() {
                let mag = if j == min_at { min2 } else { min1 };
                // Sign of the product of the other inputs.
                let sign = (parity ^ qj.to_bits()) & SIGN;
                let r = f32::from_bits(mag.to_bits() | sign);
                *m = r;
                next[v as usize] += r;
            }
        }
        std::mem::swap(&mut app, &mut next);
        if converged(&app, check_start, edge_var) {
            return finish(app, true, iteration);
        }
    }
    finish(app, false, max_iters)
}

/// Codewords decoded in lock-step by [`decode_batch`].
const LANES: usize = 8;
const SIGN: u32 = 0x8000_0000;

/// Decode several blocks of the same code. Each block runs exactly the
/// arithmetic of [`decode_slice`] and stops at its own convergence
/// iteration; blocks are interleaved across SIMD lanes.
pub(crate) fn decode_batch(blocks: &[&[f64]], code: &LdpcCode, max_iters: usize) -> Vec<DecodeOutput> {
    blocks
        .chunks(LANES)
        .flat_map(|chunk| decode_lanes(chunk, code, max_iters))
        .collect()
}

fn decode_lanes(blocks: &[&[f64]], code: &LdpcCode, max_iters: usize) -> Vec<DecodeOutput> {
    let n = code.n();
    let (check_start, edge_var) = code.csr();
    let mut channel = vec![[0f32; LANES]; n];
    for (l, block) in blocks.iter().enumerate() {
        assert_eq!(block.len(), n, "LLR block length must equal n");
        for (c, &x) in channel.iter_mut().zip(block.iter()) {
            c[l] = x as f32;
        }
    }
    let channel: Vec<f32x8> = channel.into_iter().map(f32x8::new).collect();
    let mut app = channel.clone();
    let mut next = channel.clone();
    let mut msgs = vec![f32x8::ZERO; edge_var.len()];
    let mut done: Vec<Option<DecodeOutput>> = vec![None; blocks.len()];

    let lane = |app: &[f32x8], l: usize| -> Vec<f32> { app.iter().map(|a| a.as_array()[l]).collect() };
    let harvest = |app: &[f32x8], iteration: usize, done: &mut Vec<Option<DecodeOutput>>| {
        let ok = lanes_converged(app, check_start, edge_var);
        for (l, slot) in done.iter_mut().enumerate() {
            if slot.is_none() && ok[l] {
                *slot = Some(finish(lane(app, l), true, iteration));
            }
        }
        done.iter().all(Option::is_some)
    };
    if harvest(&app, 0, &mut done) {
        return done.into_iter().map(|d| d.expect("all lanes finished")).collect();
    }

    // Magnitudes are compared as integers: for non-negative floats the bit
    // patterns order the same way, and a NaN never wins.
    let abs_mask = u32x8::splat(!SIGN);
    let sign_mask = u32x8::splat(SIGN);
    let norm = f32x8::splat(MIN_SUM_NORMALIZATION);
    let inf = i32x8::splat(f32::INFINITY.to_bits() as i32);
    let max_degree = check_start.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    let mut q = vec![f32x8::ZERO; max_degree as usize];
    for iteration in 1..=max_iters {
        next.copy_from_slice(&channel);
        for c in 0..check_start.len() - 1 {
            let (s, e) = (check_start[c] as usize, check_start[c + 1] as usize);
            let q = &mut q[..e - s];
            let vars = &edge_var[s..e];
            let msgs = &mut msgs[s..e];
            let (mut min1, mut min2) = (inf, inf);
            let mut min_at = i32x8::ZERO;
            let mut parity = u32x8::ZERO;
            for (j, ((qj, &v), &m)) in q.iter_mut().zip(vars).zip(msgs.iter()).enumerate() {
                let x = app[v as usize] - m;
                *qj = x;
                let bits: u32x8 = cast(x);
                parity ^= bits;
                let mag: i32x8 = cast(bits & abs_mask);
                let lt1 = mag.simd_lt(min1);
                let lt2 = mag.simd_lt(min2);
                min_at = lt1.select(i32x8::splat(j as i32), min_at);
                min2 = lt1.select(min1, lt2.select(mag, min2));
                min1 = lt1.select(mag, min1);
            }
            let min1: i32x8 = cast(cast::<_, f32x8>(min1) * norm);
            let min2: i32x8 = cast(cast::<_, f32x8>(min2) * norm);
            for (j, ((m, &v), &qj)) in msgs.iter_mut().zip(vars).zip(q.iter()).enumerate() {
                let mag: u32x8 = cast(min_at.simd_eq(i32x8::splat(j as i32)).select(min2, min1));
                let sign = (parity ^ cast::<_, u32x8>(qj)) & sign_mask;
                let r: f32x8 = cast(mag | sign);
                *m = r;
                next[v as usize] += r;
            }
        }
        std::mem::swap(&mut app, &mut next);
        if harvest(&app, iteration, &mut done) {
            break;
        }
    }
    done.into_iter()
        .enumerate()
        .map(|(l, d)| d.unwrap_or_else(|| finish(lane(&app, l), false, max_iters)))
        .collect()
}

/// [`converged`] for every lane at once.
fn lanes_converged(app: &[f32x8], check_start: &[u32], edge_var: &[u32]) -> [bool; LANES] {
    let sign_mask = u32x8::splat(SIGN);
    // Zero and NaN posteriors are unresolved.
    let mut bad = app.iter().fold(u32x8::ZERO, |bad, &a| {
        bad | cast::<_, u32x8>(a.simd_eq(f32x8::ZERO) | a.simd_ne(a))
    });
    for w in check_start.windows(2) {
        let parity = edge_var[w[0] as usize..w[1] as usize]
            .iter()
            .fold(u32x8::ZERO, |p, &v| p ^ cast::<_, u32x8>(app[v as usize]));
        bad |= parity & sign_mask;
    }
    bad.to_array().map(|b| b == 0)
}

fn converged(app: &[f32], check_start: &[u32], edge_var: &[u32]) -> bool {
    if app.iter().any(|&x| x == 0.0 || x.is_nan()) {
        return false;
    }
    check_start.windows(2).all(|w| {
        let parity = edge_var[w[0] as usize..w[1] as usize]
            .iter()
            .fold(0u32, |acc, &v| acc ^ app[v as usize].to_bits());
        parity & SIGN == 0
    })
}

fn finish(app: Vec<f32>, success: bool, iterations: usize) -> DecodeOutput {
    DecodeOutput {
        bits: app.iter().map(|&x| (x < 0.0) as u8).collect(),
        success,
        iterations,
        app,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::code::tests::toy_code;
    use crate::rng::{random_bits, SimRng};
    use rand::{Rng, SeedableRng};

    fn llrs_for(cw: &[u8], mag: f64) -> Vec<f64> {
        cw.iter().map(|&b| if b == 0 { mag } else { -mag }).collect()
    }

    #[test]
    fn confident_zero_word_decodes_immediately() {
        let code = LdpcCode::coded_ofdm_default();
        let out = ldpc_decode(&LlrBlock::new(vec![20.0; 162]).unwrap(), &code, 25);
        assert!(out.success);
        assert!(out.bits.iter().all(|&b| b == 0));
        assert!(out.iterations <= 1);
    }

    #[test]
    fn noiseless_codewords_converge_within_one_iteration() {
        let code = LdpcCode::nr_default();
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..5 {
            let cw = code.encode(&random_bits(&mut rng, code.k())).unwrap();
            let out = decode_slice(&llrs_for(&cw, 4.0), &code, 25);
            assert!(out.success && out.iterations <= 1);
            assert_eq!(out.bits, cw);
        }
    }

    #[test]
    fn all_zero_llrs_fail() {
        let code = LdpcCode::coded_ofdm_default();
        let out = decode_slice(&vec![0.0; 162], &code, 25);
        assert!(!out.success);
        assert_eq!(out.iterations, 25);
    }

    /// Maximum-likelihood decision by enumerating the whole toy codebook.
    fn ml_decode(code: &LdpcCode, llrs: &[f64]) -> Vec<u8> {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for u in 0u32..1 << code.k() {
            let info: Vec<u8> = (0..code.k()).map(|i| ((u >> i) & 1) as u8).collect();
            let cw = code.encode(&info).unwrap();
            let metric: f64 = cw
                .iter()
                .zip(llrs)
                .map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 })
                .sum();
            if metric > best.0 {
                best = (metric, cw);
            }
        }
        best.1
    }

    #[test]
    fn single_weak_flip_is_corrected_like_ml() {
        let code = toy_code();
        for u in 0u32..64 {
            let info: Vec<u8> = (0..6).map(|i| ((u >> i) & 1) as u8).collect();
            let cw = code.encode(&info).unwrap();
            for flip in 0..12 {
                let mut llrs = llrs_for(&cw, 20.0);
                llrs[flip] = if cw[flip] == 0 { -1.0 } else { 1.0 };
                let ml = ml_decode(&code, &llrs);
                assert_eq!(ml, cw, "oracle must recover the sent word");
                let out = decode_slice(&llrs, &code, 25);
                assert!(out.success, "info {u} flip {flip}");
                assert_eq!(out.bits, cw);
            }
        }
    }

    #[test]
    fn batch_matches_single_decodes() {
        let code = LdpcCode::coded_ofdm_default();
        let mut rng = SimRng::seed_from_u64(23);
        let blocks: Vec<Vec<f64>> = (0..19)
            .map(|i| {
                let cw = code.encode(&random_bits(&mut rng, code.k())).unwrap();
                let sigma = 0.6 + (i % 6) as f64 * 0.15;
                let mut llrs: Vec<f64> = cw
                    .iter()
                    .map(|&b| {
                        let y =
                            1.0 - 2.0 * b as f64 + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                        2.0 * y / (sigma * sigma)
                    })
                    .collect();
                if i == 5 {
                    llrs.fill(0.0);
                }
                llrs
            })
            .collect();
        let refs: Vec<&[f64]> = blocks.iter().map(Vec::as_slice).collect();
        let batch = decode_batch(&refs, &code, 25);
        assert_eq!(batch.len(), blocks.len());
        let mut iterations = std::collections::BTreeSet::new();
        for (b, out) in blocks.iter().zip(&batch) {
            assert_eq!(*out, decode_slice(b, &code, 25));
            iterations.insert(out.iterations);
        }
        assert!(iterations.len() > 2, "lanes should stop at different iterations");
    }

    #[test]
    fn success_implies_zero_syndrome() {
        let code = LdpcCode::coded_ofdm_default();
        let mut rng = SimRng::seed_from_u64(17);
        for trial in 0..300 {
            let cw = code.encode(&random_bits(&mut rng, code.k())).unwrap();
            let sigma = 0.5 + (trial % 5) as f64 * 0.2;
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let x = 1.0 - 2.0 * b as f64;
                    let y = x + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
                    2.0 * y / (sigma * sigma)
                })
                .collect();
            let out = decode_slice(&llrs, &code, 25);
            if out.success {
                assert!(code.syndrome_ok(&out.bits));
            }
        }
    }
}
