use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Binary LDPC code: sparse parity-check matrix plus a systematic encoder
/// derived from it by Gaussian elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Variable indices of each check, in CSR form.
    check_start: Vec<u32>,
    edge_var: Vec<u32>,
    /// Codeword positions that carry information bits, ascending.
    info_positions: Vec<usize>,
    /// `(position, mask)` for every parity position: the bit equals the parity
    /// of the info bits selected by `mask` (info-index space, packed in u64).
    parity_rules: Vec<(usize, Vec<u64>)>,
}

impl LdpcCode {
    /// Build a code from the variable lists of each check (0-based).
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return invalid("code length must be positive");
        }
        let mut check_start = Vec::with_capacity(checks.len() + 1);
        let mut edge_var = Vec::new();
        check_start.push(0u32);
        for (c, vars) in checks.iter().enumerate() {
            let mut sorted = vars.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != vars.len() {
                return invalid(format!("check {c} lists a variable twice"));
            }
            for &v in &sorted {
                if v >= n {
                    return invalid(format!("check {c} references variable {v} >= n={n}"));
                }
                edge_var.push(v as u32);
            }
            check_start.push(edge_var.len() as u32);
        }
        let (info_positions, parity_rules) = systematic_encoder(n, &checks);
        let k = info_positions.len();
        if k == 0 {
            return invalid("parity-check matrix has full column rank; no information bits");
        }
        Ok(LdpcCode {
            n,
            k,
            check_start,
            edge_var,
            info_positions,
            parity_rules,
        })
    }

    /// Progressive-edge-growth construction with constant column weight.
    ///
    /// Each new edge of a variable node goes to a minimum-degree check outside
    /// the node's current neighborhood (or the most distant level when the
    /// neighborhood already spans every check), which greedily maximizes the
    /// local girth. Ties are broken with the seeded RNG. If the resulting
    /// matrix is rank deficient the seed is advanced, so the returned code
    /// always has `k = n - m`.
    pub fn peg(n: usize, m: usize, col_weight: usize, seed: u64) -> Result<Self> {
        if m == 0 || m >= n {
            return invalid(format!("need 0 < m < n, got m={m}, n={n}"));
        }
        if col_weight == 0 || col_weight > m {
            return invalid(format!("column weight {col_weight} invalid for m={m}"));
        }
        for attempt in 0..64u64 {
            let checks = peg_checks(n, m, col_weight, seed.wrapping_add(attempt));
            let code = LdpcCode::from_checks(n, checks)?;
            if code.k == n - m {
                return Ok(code);
            }
        }
        Err(Error::Invariant(format!(
            "no full-rank PEG matrix found for n={n}, m={m}"
        )))
    }

    /// Default code for the coded-OFDM experiments: n=162, k=121.
    pub fn coded_ofdm_default() -> Self {
        LdpcCode::peg(162, 41, 3, 0x5eed_0003).expect("default code construction")
    }

    /// Default code for the slot link: n=1056, k=570 (rate ≈ 0.54).
    pub fn nr_default() -> Self {
        LdpcCode::peg(1056, 486, 3, 0x5eed_0054).expect("default code construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Variables of check `c`.
    pub fn check(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (s, e) = (self.check_start[c] as usize, self.check_start[c + 1] as usize);
        self.edge_var[s..e].iter().map(|&v| v as usize)
    }

    pub(crate) fn csr(&self) -> (&[u32], &[u32]) {
        (&self.check_start, &self.edge_var)
    }

    /// Checks incident to each variable.
    pub fn variable_checks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for c in 0..self.m() {
            for v in self.check(c) {
                out[v].push(c);
            }
        }
        out
    }

    /// Systematic encoding: info bits land verbatim on
    /// [`LdpcCode::info_positions`].
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return invalid(format!("info length {} != k={}", info.len(), self.k));
        }
        let words = self.k.div_ceil(64);
        let mut packed = vec![0u64; words];
        for (j, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (pos, mask) in &self.parity_rules {
            let ones: u32 = mask.iter().zip(&packed).map(|(m, p)| (m & p).count_ones()).sum();
            cw[*pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Info bits of a codeword (inverse of the systematic placement).
    pub fn info_bits(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// `true` iff every parity check is satisfied.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && (0..self.m()).all(|c| self.check(c).fold(0u8, |acc, v| acc ^ (bits[v] & 1)) == 0)
    }

    /// Serialize the parity-check matrix in alist format.
    pub fn to_alist(&self) -> String {
        let var_checks = self.variable_checks();
        let row_deg: Vec<usize> = (0..self.m()).map(|c| self.check(c).count()).collect();
        let col_deg: Vec<usize> = var_checks.iter().map(Vec::len).collect();
        let max_col = col_deg.iter().copied().max().unwrap_or(0);
        let max_row = row_deg.iter().copied().max().unwrap_or(0);
        let join =
            |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.n, self.m()));
        out.push_str(&format!("{max_col} {max_row}\n"));
        out.push_str(&join(&mut col_deg.iter().copied()));
        out.push('\n');
        out.push_str(&join(&mut row_deg.iter().copied()));
        out.push('\n');
        for checks in &var_checks {
            let mut it = checks
                .iter()
                .map(|c| c + 1)
                .chain(std::iter::repeat_n(0, max_col - checks.len()));
            out.push_str(&join(&mut it));
            out.push('\n');
        }
        for (c, &deg) in row_deg.iter().enumerate() {
            let mut it = self
                .check(c)
                .map(|v| v + 1)
                .chain(std::iter::repeat_n(0, max_row - deg));
            out.push_str(&join(&mut it));
            out.push('\n');
        }
        out
    }

    /// Parse an alist parity-check matrix. Zero entries are padding.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad alist token `{t}`")))
        });
        let mut next = |what: &str| -> Result<usize> {
            nums.next()
                .unwrap_or_else(|| Err(Error::Parse(format!("alist truncated at {what}"))))
        };
        let n = next("n")?;
        let m = next("m")?;
        let max_col = next("max column degree")?;
        let max_row = next("max row degree")?;
        let col_deg = (0..n)
            .map(|_| next("column degrees"))
            .collect::<Result<Vec<_>>>()?;
        let row_deg = (0..m).map(|_| next("row degrees")).collect::<Result<Vec<_>>>()?;
        if col_deg.iter().any(|&d| d > max_col) || row_deg.iter().any(|&d| d > max_row) {
            return Err(Error::Parse("alist degree exceeds declared maximum".into()));
        }
        let mut from_cols = vec![Vec::new(); m];
        for (v, &deg) in col_deg.iter().enumerate() {
            for slot in 0..max_col {
                let c = next("column lists")?;
                if slot < deg {
                    if c == 0 || c > m {
                        return Err(Error::Parse(format!("column {v}: bad row index {c}")));
                    }
                    from_cols[c - 1].push(v);
                } else if c != 0 {
                    return Err(Error::Parse(format!("column {v}: expected padding")));
                }
            }
        }
        let mut checks = Vec::with_capacity(m);
        for (c, &deg) in row_deg.iter().enumerate() {
            let mut vars = Vec::with_capacity(deg);
            for slot in 0..max_row {
                let v = next("row lists")?;
                if slot < deg {
                    if v == 0 || v > n {
                        return Err(Error::Parse(format!("row {c}: bad column index {v}")));
                    }
                    vars.push(v - 1);
                } else if v != 0 {
                    return Err(Error::Parse(format!("row {c}: expected padding")));
                }
            }
            let mut a = vars.clone();
            let mut b = from_cols[c].clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(Error::Parse(format!("row {c} disagrees with the column lists")));
            }
            checks.push(vars);
        }
        LdpcCode::from_checks(n, checks)
    }
}

fn peg_checks(n: usize, m: usize, dv: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(dv); n];
    let mut check_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut check_seen = vec![u32::MAX; m];
    let mut var_seen = vec![u32::MAX; n];
    let mut stamp = 0u32;

    for v in 0..n {
        for edge in 0..dv {
            let candidates: Vec<usize> = if edge == 0 {
                (0..m).collect()
            } else {
                stamp += 1;
                peg_far_checks(v, &var_adj, &check_adj, &mut check_seen, &mut var_seen, stamp)
            };
            let min_deg = candidates
                .iter()
                .map(|&c| check_adj[c].len())
                .min()
                .expect("candidate set is never empty");
            let best: Vec<usize> = candidates
                .into_iter()
                .filter(|&c| check_adj[c].len() == min_deg)
                .collect();
            let c = *best.choose(&mut rng).expect("nonempty");
            var_adj[v].push(c);
            check_adj[c].push(v);
        }
    }
    check_adj
}

/// Checks not reachable from `v` at the deepest expansion level.
fn peg_far_checks(
    v: usize,
    var_adj: &[Vec<usize>],
    check_adj: &[Vec<usize>],
    check_seen: &mut [u32],
    var_seen: &mut [u32],
    stamp: u32,
) -> Vec<usize> {
    let m = check_adj.len();
    let mut reached = 0usize;
    let mut frontier_vars = vec![v];
    var_seen[v] = stamp;
    loop {
        let before = reached;
        let mut new_checks = Vec::new();
        for &u in &frontier_vars {
            for &c in &var_adj[u] {
                if check_seen[c] != stamp {
                    check_seen[c] = stamp;
                    new_checks.push(c);
                }
            }
        }
        reached += new_checks.len();
        if reached == m {
            // Everything is reachable: choose among the checks reached last.
            return new_checks;
        }
        if reached == before {
            return (0..m).filter(|&c| check_seen[c] != stamp).collect();
        }
        let mut next_vars = Vec::new();
        for &c in &new_checks {
            for &u in &check_adj[c] {
                if var_seen[u] != stamp {
                    var_seen[u] = stamp;
                    next_vars.push(u);
                }
            }
        }
        frontier_vars = next_vars;
    }
}

/// Gaussian elimination over GF(2). Returns the info positions and, for
/// every pivot (parity) position, the info-bit mask that determines it.
fn systematic_encoder(n: usize, checks: &[Vec<usize>]) -> (Vec<usize>, Vec<(usize, Vec<u64>)>) {
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = checks
        .iter()
        .map(|vars| {
            let mut r = vec![0u64; words];
            for &v in vars {
                r[v / 64] ^= 1 << (v % 64);
            }
            r
        })
        .collect();
    let get = |r: &[u64], col: usize| (r[col / 64] >> (col % 64)) & 1 == 1;

    // Pivot from the right so that, for typical matrices, parity bits sit at
    // the end of the codeword.
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut next_row = 0;
    for col in (0..n).rev() {
        if next_row == rows.len() {
            break;
        }
        let Some(found) = (next_row..rows.len()).find(|&r| get(&rows[r], col)) else {
            continue;
        };
        rows.swap(next_row, found);
        let pivot_row = rows[next_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next_row && get(row, col) {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivots.push((next_row, col));
        next_row += 1;
    }

    let mut is_pivot = vec![false; n];
    for &(_, col) in &pivots {
        is_pivot[col] = true;
    }
    let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = info_positions.len();
    let mut rules = Vec::with_capacity(pivots.len());
    for &(r, col) in &pivots {
        let mut mask = vec![0u64; k.div_ceil(64)];
        for (j, &pos) in info_positions.iter().enumerate() {
            if get(&rows[r], pos) {
                mask[j / 64] |= 1 << (j % 64);
            }
        }
        rules.push((col, mask));
    }
    rules.sort_by_key(|&(col, _)| col);
    (info_positions, rules)
}
