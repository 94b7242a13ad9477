//! Vector-valued Shamir sharing of user data and recovery of `W x` from
//! products of `W` with share matrices, plus the product-code view used when
//! `W` itself is Reed-Solomon coded.
//!
//! Share indices `h` and block indices `ℓ` are 0-based throughout this module.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{Fe, Field, Matrix};
use crate::rs::RsCode;

/// Private data of one user plus the `k - 1` random vectors mixed into its
/// shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserData {
    pub x: Vec<Fe>,
    pub randomness: Vec<Vec<Fe>>,
}

impl UserData {
    /// Draws the randomness vectors uniformly.
    pub fn with_random<R: Rng + ?Sized>(field: &Field, x: Vec<Fe>, k: usize, rng: &mut R) -> Self {
        let randomness = (1..k)
            .map(|_| (0..x.len()).map(|_| field.random(rng)).collect())
            .collect();
        UserData { x, randomness }
    }
}

/// `S^(h)`: column `i` holds the `h`-th share of user `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareMatrix {
    pub h: usize,
    pub s: Matrix,
}

/// Produces the `n` share matrices of all users.
pub fn make_shares(users: &[UserData], code: &RsCode) -> Result<Vec<ShareMatrix>> {
    let r = users.first().map_or(0, |u| u.x.len());
    let k = code.k();
    for u in users {
        if u.x.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: u.x.len(),
            });
        }
        if u.randomness.len() != k - 1 {
            return Err(Error::DimensionMismatch {
                expected: k - 1,
                got: u.randomness.len(),
            });
        }
        if let Some(bad) = u.randomness.iter().find(|v| v.len() != r) {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: bad.len(),
            });
        }
    }
    let mut shares: Vec<ShareMatrix> = (0..code.n())
        .map(|h| ShareMatrix {
            h,
            s: Matrix::zeros(r, users.len()),
        })
        .collect();
    let mut message = vec![Fe::ZERO; k];
    for (i, user) in users.iter().enumerate() {
        for l in 0..r {
            message[0] = user.x[l];
            for (kappa, rv) in user.randomness.iter().enumerate() {
                message[kappa + 1] = rv[l];
            }
            for (h, symbol) in code.encode(&message)?.into_iter().enumerate() {
                shares[h].s.set(l, i, symbol);
            }
        }
    }
    Ok(shares)
}

/// Recovers `W_ℓ x_i` for every user from intermediate results
/// `W_ℓ S^(h)`, given as `(h, matrix)` pairs. Column `i` of the output is
/// user `i`'s result.
pub fn recover_results(irs: &[(usize, Matrix)], code: &RsCode) -> Result<Matrix> {
    let mut distinct: Vec<&(usize, Matrix)> = Vec::with_capacity(irs.len());
    for ir in irs {
        if !distinct.iter().any(|d| d.0 == ir.0) {
            distinct.push(ir);
        }
    }
    if distinct.len() < code.k() {
        return Err(Error::NotEnoughShares {
            needed: code.k(),
            available: distinct.len(),
        });
    }
    let used = &distinct[..code.k()];
    let (rows, cols) = (used[0].1.rows(), used[0].1.cols());
    if let Some(bad) = used.iter().find(|d| d.1.rows() != rows || d.1.cols() != cols) {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: bad.1.rows() * bad.1.cols(),
        });
    }
    let positions: Vec<usize> = used.iter().map(|d| d.0).collect();
    let weights = code.secret_weights(&positions)?;
    let f = code.field();
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = used
                .iter()
                .zip(&weights)
                .fold(Fe::ZERO, |acc, (d, &w)| f.add(acc, f.mul(w, d.1.get(i, j))));
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Exact distribution of the share values at `subset` when sharing `secret`,
/// taken over all `q^(k-1)` choices of randomness.
pub fn privacy_histogram(
    secret: Fe,
    subset: &[usize],
    code: &RsCode,
) -> Result<BTreeMap<Vec<u64>, u64>> {
    let k = code.k();
    if subset.len() >= k {
        return Err(Error::SubsetTooLarge {
            size: subset.len(),
            threshold: k,
        });
    }
    if let Some(&bad) = subset.iter().find(|&&p| p >= code.n()) {
        return Err(Error::InvalidParams(format!("share position {bad} out of range")));
    }
    let q = code.field().modulus();
    let total = q
        .checked_pow((k - 1) as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::InvalidParams("randomness space too large to enumerate".into()))?;
    let mut hist = BTreeMap::new();
    let mut message = vec![Fe::ZERO; k];
    message[0] = secret;
    for idx in 0..total {
        let mut rem = idx;
        for slot in message.iter_mut().skip(1) {
            *slot = code.field().elem(rem % q);
            rem /= q;
        }
        let cw = code.encode(&message)?;
        let key: Vec<u64> = subset.iter().map(|&p| cw[p].value()).collect();
        *hist.entry(key).or_insert(0) += 1;
    }
    Ok(hist)
}

/// One component decode performed while peeling a product code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeEvent {
    /// Row `ℓ` decoded with the `(n, k)` share code.
    Row(usize),
    /// Column `h` decoded with the `(n', k')` code on `W`.
    Column(usize),
}

/// Known/unknown mask of an `n' × n` product-code array, one bitmask per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeelPattern {
    rows: Vec<u64>,
    n_cols: usize,
}

impl PeelPattern {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_cols <= 64, "at most 64 share positions are supported");
        PeelPattern {
            rows: vec![0; n_rows],
            n_cols,
        }
    }

    pub fn from_cells(n_rows: usize, n_cols: usize, cells: &[(usize, usize)]) -> Self {
        let mut p = PeelPattern::new(n_rows, n_cols);
        for &(l, h) in cells {
            p.set(l, h);
        }
        p
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize) {
        self.rows[row] |= 1 << col;
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row] >> col & 1 == 1
    }

    pub fn row_count(&self, row: usize) -> usize {
        self.rows[row].count_ones() as usize
    }

    fn full_row(&self) -> u64 {
        if self.n_cols == 64 {
            u64::MAX
        } else {
            (1 << self.n_cols) - 1
        }
    }

    pub fn is_complete(&self) -> bool {
        let full = self.full_row();
        self.rows.iter().all(|&r| r == full)
    }

    pub fn known_cells(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Iterative row/column erasure decoding. Each sweep decodes every row
    /// with at least `k` known cells (ascending), then every column with at
    /// least `k'` known cells (ascending); only lines with unknown cells are
    /// decoded. Returns the ordered decode events.
    pub fn peel(&mut self, k: usize, k_prime: usize) -> Vec<DecodeEvent> {
        let mut events = Vec::new();
        self.peel_with(k, k_prime, |e| events.push(e));
        events
    }

    /// Same as [`peel`](Self::peel) but reports events through a callback.
    pub fn peel_with(&mut self, k: usize, k_prime: usize, mut on_event: impl FnMut(DecodeEvent)) {
        let full = self.full_row();
        loop {
            let mut progress = false;
            for (l, row) in self.rows.iter_mut().enumerate() {
                if *row != full && row.count_ones() as usize >= k {
                    *row = full;
                    on_event(DecodeEvent::Row(l));
                    progress = true;
                }
            }
            for h in 0..self.n_cols {
                let bit = 1u64 << h;
                let known = self.rows.iter().filter(|&&r| r & bit != 0).count();
                if known < self.rows.len() && known >= k_prime {
                    for r in self.rows.iter_mut() {
                        *r |= bit;
                    }
                    on_event(DecodeEvent::Column(h));
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
    }
}

/// Result of peeling a pattern or an array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelOutcome {
    pub complete: bool,
    pub events: Vec<DecodeEvent>,
}

/// Runs the peeling schedule on a copy of `pattern`.
pub fn peel_pattern(pattern: &PeelPattern, k: usize, k_prime: usize) -> PeelOutcome {
    let mut p = pattern.clone();
    let events = p.peel(k, k_prime);
    PeelOutcome {
        complete: p.is_complete(),
        events,
    }
}

/// Encodes the row blocks of `w` with a nonsystematic `(n', k')` code:
/// `C_ℓ = Σ_κ α_ℓ^κ W_κ`, where `W` is split into `k'` equal row blocks.
pub fn encode_blocks(w: &Matrix, code: &RsCode) -> Result<Vec<Matrix>> {
    let kp = code.k();
    if !w.rows().is_multiple_of(kp) {
        return Err(Error::InvalidParams(format!(
            "{} rows cannot be split into {kp} equal blocks",
            w.rows()
        )));
    }
    let b = w.rows() / kp;
    let blocks: Vec<Matrix> = (0..kp).map(|i| w.row_block(i * b, (i + 1) * b)).collect();
    let mut coded = vec![Matrix::zeros(b, w.cols()); code.n()];
    let mut message = vec![Fe::ZERO; kp];
    for i in 0..b {
        for j in 0..w.cols() {
            for (slot, blk) in message.iter_mut().zip(&blocks) {
                *slot = blk.get(i, j);
            }
            for (c, v) in coded.iter_mut().zip(code.encode(&message)?) {
                c.set(i, j, v);
            }
        }
    }
    Ok(coded)
}

/// Array of intermediate results `C_ℓ s_i^(h)` of a single user; rows are
/// codewords of the share code, columns codewords of the code on `W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductCodeArray {
    cells: Vec<Option<Vec<Fe>>>,
    row_code: RsCode,
    col_code: RsCode,
}

impl ProductCodeArray {
    /// Full array for user data `user` and matrix `w` (all cells known).
    pub fn encode(w: &Matrix, user: &UserData, row_code: &RsCode, col_code: &RsCode) -> Result<Self> {
        let coded = encode_blocks(w, col_code)?;
        let shares = make_shares(std::slice::from_ref(user), row_code)?;
        let f = row_code.field();
        let mut cells = Vec::with_capacity(coded.len() * shares.len());
        for c in &coded {
            for s in &shares {
                cells.push(Some(f.mat_vec_mul(c, &s.s.column(0))?));
            }
        }
        Ok(ProductCodeArray {
            cells,
            row_code: row_code.clone(),
            col_code: col_code.clone(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.col_code.n()
    }

    pub fn n_cols(&self) -> usize {
        self.row_code.n()
    }

    pub fn cell(&self, l: usize, h: usize) -> Option<&[Fe]> {
        self.cells[l * self.n_cols() + h].as_deref()
    }

    /// Keeps only the cells listed in `known`.
    pub fn retain(&mut self, known: &PeelPattern) {
        let nc = self.n_cols();
        for (idx, cell) in self.cells.iter_mut().enumerate() {
            if !known.get(idx / nc, idx % nc) {
                *cell = None;
            }
        }
    }

    pub fn pattern(&self) -> PeelPattern {
        let nc = self.n_cols();
        let mut p = PeelPattern::new(self.n_rows(), nc);
        for (idx, cell) in self.cells.iter().enumerate() {
            if cell.is_some() {
                p.set(idx / nc, idx % nc);
            }
        }
        p
    }

    fn decode_line(&mut self, line: &[usize], code: &RsCode) -> Result<()> {
        let known: Vec<usize> = (0..line.len()).filter(|&p| self.cells[line[p]].is_some()).collect();
        let len = known
            .first()
            .and_then(|&p| self.cells[line[p]].as_ref())
            .map_or(0, Vec::len);
        let mut filled: Vec<Vec<Fe>> = vec![Vec::with_capacity(len); line.len()];
        for t in 0..len {
            let avail: Vec<(usize, Fe)> = known
                .iter()
                .map(|&p| (p, self.cells[line[p]].as_ref().unwrap()[t]))
                .collect();
            let cw = code.encode(&code.decode_erasures(&avail)?)?;
            for (dst, v) in filled.iter_mut().zip(cw) {
                dst.push(v);
            }
        }
        for (p, vals) in filled.into_iter().enumerate() {
            self.cells[line[p]].get_or_insert(vals);
        }
        Ok(())
    }

    /// Peels the array in place, filling recovered cells with decoded values.
    /// The schedule is that of [`PeelPattern::peel`].
    pub fn peel(&mut self) -> Result<PeelOutcome> {
        let mut pattern = self.pattern();
        let events = pattern.peel(self.row_code.k(), self.col_code.k());
        let (nr, nc) = (self.n_rows(), self.n_cols());
        for &ev in &events {
            match ev {
                DecodeEvent::Row(l) => {
                    let line: Vec<usize> = (0..nc).map(|h| l * nc + h).collect();
                    let code = self.row_code.clone();
                    self.decode_line(&line, &code)?;
                }
                DecodeEvent::Column(h) => {
                    let line: Vec<usize> = (0..nr).map(|l| l * nc + h).collect();
                    let code = self.col_code.clone();
                    self.decode_line(&line, &code)?;
                }
            }
        }
        Ok(PeelOutcome {
            complete: pattern.is_complete(),
            events,
        })
    }

    /// Extracts `(W_1 x, ..., W_k' x)` stacked, assuming the array is
    /// complete: decode `k'` rows for their secrets `C_ℓ x`, then the column
    /// code across those secrets.
    pub fn recover_inference(&self) -> Result<Vec<Fe>> {
        let kp = self.col_code.k();
        let positions: Vec<usize> = (0..self.n_cols()).take(self.row_code.k()).collect();
        let weights = self.row_code.secret_weights(&positions)?;
        let f = self.row_code.field();
        let mut secrets: Vec<Vec<Fe>> = Vec::with_capacity(kp);
        for l in 0..kp {
            let cells: Vec<&[Fe]> = positions
                .iter()
                .map(|&h| self.cell(l, h).ok_or(Error::NotEnoughShares { needed: 1, available: 0 }))
                .collect::<Result<_>>()?;
            let len = cells[0].len();
            secrets.push(
                (0..len)
                    .map(|t| {
                        cells
                            .iter()
                            .zip(&weights)
                            .fold(Fe::ZERO, |acc, (c, &w)| f.add(acc, f.mul(w, c[t])))
                    })
                    .collect(),
            );
        }
        let len = secrets[0].len();
        let mut blocks = vec![Vec::with_capacity(len); kp];
        for t in 0..len {
            let avail: Vec<(usize, Fe)> = (0..kp).map(|l| (l, secrets[l][t])).collect();
            for (b, v) in blocks.iter_mut().zip(self.col_code.decode_erasures(&avail)?) {
                b.push(v);
            }
        }
        Ok(blocks.concat())
    }

    /// True iff every fully known row and column is a codeword of its code.
    pub fn is_consistent(&self) -> Result<bool> {
        let (nr, nc) = (self.n_rows(), self.n_cols());
        let rows = (0..nr).map(|l| ((0..nc).map(|h| l * nc + h).collect::<Vec<_>>(), &self.row_code));
        let cols = (0..nc).map(|h| ((0..nr).map(|l| l * nc + h).collect::<Vec<_>>(), &self.col_code));
        for (line, code) in rows.chain(cols) {
            if line.iter().any(|&i| self.cells[i].is_none()) {
                continue;
            }
            let len = self.cells[line[0]].as_ref().unwrap().len();
            for t in 0..len {
                let avail: Vec<(usize, Fe)> = line
                    .iter()
                    .enumerate()
                    .map(|(p, &i)| (p, self.cells[i].as_ref().unwrap()[t]))
                    .collect();
                match code.decode_erasures(&avail) {
                    Ok(_) => {}
                    Err(Error::InconsistentShares) => return Ok(false),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(true)
    }
}
