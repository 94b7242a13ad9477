//! Cyclic assignment designs: which submatrices of `W` (or coded blocks of
//! `C`) and which share matrices each edge node receives, and in which order
//! it processes them.
//!
//! Index matrices hold 1-based labels, matching the usual way these designs
//! are written down; the per-node sets are 1-based as well. The simulator
//! converts to 0-based once when it compiles a plan.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Maps any integer onto `[1, e]` by adding or subtracting `e`.
/// Unlike `x mod e`, `wrap_index(e, e) == e`.
pub fn wrap_index(x: i64, e: usize) -> usize {
    assert!(e > 0);
    let e = e as i64;
    ((x - 1).rem_euclid(e) + 1) as usize
}

/// A permutation of `[order]` consisting of one cycle through every element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicPermutation {
    // image[i - 1] = π(i)
    image: Vec<usize>,
}

impl CyclicPermutation {
    /// Builds the permutation from cycle notation, e.g. `[1, 4, 2, 5, 3]`
    /// for `(1 4 2 5 3)`. The cycle must contain every element of `[order]`.
    pub fn from_cycle(cycle: &[usize]) -> Result<Self> {
        let order = cycle.len();
        if order == 0 {
            return Err(Error::InvalidParams("empty cycle".into()));
        }
        let mut image = vec![0; order];
        for (pos, &x) in cycle.iter().enumerate() {
            if x == 0 || x > order || image[x - 1] != 0 {
                return Err(Error::InvalidParams(format!(
                    "cycle {cycle:?} is not a full cycle on [{order}]"
                )));
            }
            image[x - 1] = cycle[(pos + 1) % order];
        }
        Ok(CyclicPermutation { image })
    }

    /// Builds from an image table (`image[i - 1] = π(i)`), rejecting anything
    /// that is not a single cycle of full length.
    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let order = image.len();
        let mut seen = vec![false; order];
        let mut x = 1;
        for _ in 0..order {
            if x == 0 || x > order || seen[x - 1] {
                return Err(Error::InvalidParams(format!(
                    "image {image:?} is not a single {order}-cycle"
                )));
            }
            seen[x - 1] = true;
            x = image[x - 1];
        }
        if x != 1 {
            return Err(Error::InvalidParams(format!("image {image:?} is not a single {order}-cycle")));
        }
        Ok(CyclicPermutation { image })
    }

    /// The generator `(1 e e-1 ... 2)`, i.e. `π(x) = x - 1` with `π(1) = e`.
    pub fn descending(order: usize) -> Self {
        assert!(order > 0);
        CyclicPermutation {
            image: (1..=order).map(|x| wrap_index(x as i64 - 1, order)).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// `π(x)` for `x` in `[order]`.
    pub fn apply(&self, x: usize) -> usize {
        self.image[x - 1]
    }

    /// `π^power(x)`; negative powers use the inverse.
    pub fn apply_pow(&self, x: usize, power: i64) -> usize {
        let steps = power.rem_euclid(self.order() as i64);
        (0..steps).fold(x, |y, _| self.apply(y))
    }

    /// `π^power` as a permutation table.
    pub fn pow(&self, power: i64) -> Vec<usize> {
        (1..=self.order()).map(|x| self.apply_pow(x, power)).collect()
    }
}

/// Matrix of 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<usize>,
}

impl IndexMatrix {
    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols));
        IndexMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based row `i`, column `j`.
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.data.chunks(self.cols.max(1)).map(<[usize]>::to_vec).collect()
    }

    /// Entries of 0-based column `j`, top to bottom.
    pub fn column(&self, j: usize) -> Vec<usize> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn without_row(&self, drop: usize) -> IndexMatrix {
        let rows: Vec<Vec<usize>> = self
            .to_rows()
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i != drop)
            .map(|(_, r)| r)
            .collect();
        IndexMatrix::from_rows(&rows)
    }
}

impl fmt::Display for IndexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// `I_w`: row `i`, column `j` holds `π^i(j)` (0-based `i`).
pub fn build_iw(e: usize, p: usize, pi: &CyclicPermutation) -> Result<IndexMatrix> {
    if p == 0 || p > e {
        return Err(Error::InvalidParams(format!("need 1 <= p <= e, got p={p}, e={e}")));
    }
    if pi.order() != e {
        return Err(Error::InvalidParams(format!(
            "generator order {} differs from e={e}",
            pi.order()
        )));
    }
    Ok(power_rows(e, pi, (0..p as i64).collect()))
}

fn power_rows(cols: usize, pi: &CyclicPermutation, powers: Vec<i64>) -> IndexMatrix {
    let rows: Vec<Vec<usize>> = powers
        .into_iter()
        .map(|pw| (1..=cols).map(|j| pi.apply_pow(j, pw)).collect())
        .collect();
    IndexMatrix::from_rows(&rows)
}

/// `⌈⌈e/p⌉·n/e⌉`, the closed-form number of share matrices per node.
pub fn shares_per_node_formula(e: usize, p: usize, n: usize) -> usize {
    (e.div_ceil(p) * n).div_ceil(e)
}

/// Share placement: the `(β+1) × e` matrix `I_s`, per-node share sets (the
/// column entries that fall in `[n]`, in processing order), and the largest
/// set size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharePlacement {
    pub matrix: IndexMatrix,
    pub sets: Vec<Vec<usize>>,
    pub a: usize,
}

/// `I_s`: row `d` holds `π^{d(e-p)}(j)` for `j` in `[e]`, `d = 0..=β` with
/// `β = ⌈e/p⌉ - 1`. `π` has order `max(n, e)`.
pub fn build_is(e: usize, p: usize, n: usize, pi: &CyclicPermutation) -> Result<SharePlacement> {
    if p == 0 || p > e || n == 0 {
        return Err(Error::InvalidParams(format!("invalid (e,p,n)=({e},{p},{n})")));
    }
    if pi.order() != n.max(e) {
        return Err(Error::InvalidParams(format!(
            "generator order {} differs from max(n,e)={}",
            pi.order(),
            n.max(e)
        )));
    }
    let beta = e.div_ceil(p) - 1;
    let powers = (0..=beta).map(|d| (d * (e - p)) as i64).collect();
    let matrix = power_rows(e, pi, powers);
    let sets = column_sets_within(&matrix, n);
    let a = sets.iter().map(Vec::len).max().unwrap_or(0);
    Ok(SharePlacement { matrix, sets, a })
}

fn column_sets_within(matrix: &IndexMatrix, n: usize) -> Vec<Vec<usize>> {
    (0..matrix.cols())
        .map(|j| {
            let mut seen = BTreeSet::new();
            matrix
                .column(j)
                .into_iter()
                .filter(|&h| h <= n && seen.insert(h))
                .collect()
        })
        .collect()
}

/// `I_c` for `n'` coded blocks of `W`.
///
/// * `n' == e`: same as [`build_iw`] with the descending generator.
/// * `n' > e`: powers of `pi_c` (order `n'`) truncated to `e` columns.
/// * `n' < e`: labels `1..=n'` are laid cyclically along shifted diagonals,
///   row `i` starting in column `i`; the remaining cells are filled row-major
///   with the least-used label not already in the column (smallest on ties).
pub fn build_ic(e: usize, p: usize, n_prime: usize, pi_c: Option<&CyclicPermutation>) -> Result<IndexMatrix> {
    if p == 0 || p > e || n_prime == 0 {
        return Err(Error::InvalidParams(format!("invalid (e,p,n')=({e},{p},{n_prime})")));
    }
    if n_prime >= e {
        let default;
        let pi = match pi_c {
            Some(pi) => pi,
            None => {
                default = CyclicPermutation::descending(n_prime);
                &default
            }
        };
        if pi.order() != n_prime {
            return Err(Error::InvalidParams(format!(
                "generator order {} differs from n'={n_prime}",
                pi.order()
            )));
        }
        return Ok(power_rows(e, pi, (0..p as i64).collect()));
    }
    if p > n_prime {
        return Err(Error::InfeasibleFill { column: 0 });
    }
    let mut cells: Vec<Option<usize>> = vec![None; p * e];
    for i in 0..p {
        for c in 0..n_prime {
            cells[i * e + (i + c) % e] = Some(c + 1);
        }
    }
    let mut counts = vec![0usize; n_prime + 1];
    for v in cells.iter().flatten() {
        counts[*v] += 1;
    }
    for idx in 0..p * e {
        if cells[idx].is_some() {
            continue;
        }
        let j = idx % e;
        let in_col: Vec<usize> = (0..p).filter_map(|i| cells[i * e + j]).collect();
        let pick = (1..=n_prime)
            .filter(|v| !in_col.contains(v))
            .min_by_key(|&v| (counts[v], v))
            .ok_or(Error::InfeasibleFill { column: j })?;
        cells[idx] = Some(pick);
        counts[pick] += 1;
    }
    let mut rows: Vec<Vec<usize>> = cells
        .chunks(e)
        .map(|r| r.iter().map(|c| c.expect("all cells filled")).collect())
        .collect();
    let (lo, hi) = (p * e / n_prime, (p * e).div_ceil(n_prime));
    if counts[1..].iter().any(|&c| c < lo || c > hi) {
        rows = balanced_fill(e, p, n_prime)?;
    }
    Ok(IndexMatrix::from_rows(&rows))
}

/// Fallback for [`build_ic`] when the greedy pass leaves the label counts
/// uneven: every label gets `⌊pe/n'⌋` or `⌈pe/n'⌉` cells, the labels taking
/// the larger count being the lexicographically smallest set for which a
/// duplicate-free completion exists (max-flow from labels to columns).
fn balanced_fill(e: usize, p: usize, n_prime: usize) -> Result<Vec<Vec<usize>>> {
    let mut grid: Vec<Vec<usize>> = vec![vec![0; e]; p];
    for (i, row) in grid.iter_mut().enumerate() {
        for c in 0..n_prime {
            row[(i + c) % e] = c + 1;
        }
    }
    let holes_in = |j: usize| (0..p).filter(|&i| grid[i][j] == 0).count();
    let total = p * e;
    let lo = total / n_prime;
    let extra = total - lo * n_prime;
    // Nodes: source, labels 1..=n', columns, sink.
    let (src, sink) = (0, n_prime + e + 1);
    let col_node = |j: usize| n_prime + 1 + j;
    for heavy in combinations(n_prime, extra) {
        let mut cap = vec![vec![0usize; sink + 1]; sink + 1];
        for v in 1..=n_prime {
            let target = lo + usize::from(heavy.contains(&v));
            cap[src][v] = target - p;
            for j in 0..e {
                if (0..p).all(|i| grid[i][j] != v) {
                    cap[v][col_node(j)] = 1;
                }
            }
        }
        let holes: usize = (0..e).map(holes_in).sum();
        for j in 0..e {
            cap[col_node(j)][sink] = holes_in(j);
        }
        if max_flow(&mut cap, src, sink) != holes {
            continue;
        }
        // A saturated label->column edge means the label goes in that
        // column; labels are placed ascending top to bottom.
        let mut filled = grid.clone();
        for j in 0..e {
            let labels = (1..=n_prime).filter(|&v| cap[col_node(j)][v] == 1);
            let rows = (0..p).filter(|&i| grid[i][j] == 0);
            for (i, v) in rows.zip(labels) {
                filled[i][j] = v;
            }
        }
        return Ok(filled);
    }
    Err(Error::InfeasibleFill { column: 0 })
}

/// Edmonds-Karp on a dense residual matrix; leaves the residual in `cap`.
fn max_flow(cap: &mut [Vec<usize>], src: usize, sink: usize) -> usize {
    let n = cap.len();
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            return flow;
        }
        let mut bottleneck = usize::MAX;
        let mut v = sink;
        while v != src {
            bottleneck = bottleneck.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != src {
            cap[prev[v]][v] -= bottleneck;
            cap[v][prev[v]] += bottleneck;
            v = prev[v];
        }
        flow += bottleneck;
    }
}

/// All `size`-subsets of `1..=n` in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..=n {
            cur.push(v);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, size, &mut Vec::new(), &mut out);
    out
}

/// Complete assignment for one scheme instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub e: usize,
    pub p: usize,
    pub n: usize,
    /// Number of submatrices of `W` (uncoded: `e`) or coded blocks (`n'`).
    pub blocks: usize,
    /// `I_w`, or `I_c` when `W` is coded.
    pub w_matrix: IndexMatrix,
    pub s_matrix: IndexMatrix,
    /// `I_j^w` in processing order.
    pub w_sets: Vec<Vec<usize>>,
    /// `I_j^s` in processing order.
    pub s_sets: Vec<Vec<usize>>,
    /// Largest number of share matrices at one node.
    pub a: usize,
}

impl AssignmentPlan {
    fn assemble(e: usize, p: usize, n: usize, blocks: usize, w_matrix: IndexMatrix, share: SharePlacement) -> Self {
        let w_sets = (0..e).map(|j| w_matrix.column(j)).collect();
        AssignmentPlan {
            e,
            p,
            n,
            blocks,
            w_matrix,
            s_matrix: share.matrix,
            w_sets,
            s_sets: share.sets,
            a: share.a,
        }
    }

    /// Uncoded `W` with an explicit generator (order `e`, requires `n <= e`).
    pub fn with_generator(e: usize, p: usize, n: usize, pi: &CyclicPermutation) -> Result<Self> {
        if n > e {
            return Err(Error::InvalidParams(format!("uncoded plans need n <= e, got n={n}, e={e}")));
        }
        let w = build_iw(e, p, pi)?;
        let s = build_is(e, p, n, pi)?;
        Ok(Self::assemble(e, p, n, e, w, s))
    }

    /// Uncoded `W` with the descending generator.
    pub fn uncoded(e: usize, p: usize, n: usize) -> Result<Self> {
        Self::with_generator(e, p, n, &CyclicPermutation::descending(e))
    }

    /// `W` coded into `n'` blocks; shares placed with the descending
    /// generator of order `max(n, e)`.
    pub fn coded(e: usize, p: usize, n: usize, n_prime: usize) -> Result<Self> {
        let w = build_ic(e, p, n_prime, None)?;
        let s = build_is(e, p, n, &CyclicPermutation::descending(n.max(e)))?;
        Ok(Self::assemble(e, p, n, n_prime, w, s))
    }

    /// Number of times block `ℓ` (1-based) is computed on some share when
    /// every node processes everything it holds.
    pub fn block_load(&self, l: usize) -> usize {
        (0..self.e)
            .filter(|&j| self.w_sets[j].contains(&l))
            .map(|j| self.s_sets[j].len())
            .sum()
    }

    /// Same plan with one row of `I_s` removed; used to exercise coverage
    /// failures.
    pub fn drop_share_row(&self, row: usize) -> Self {
        let matrix = self.s_matrix.without_row(row);
        let sets = column_sets_within(&matrix, self.n);
        let a = sets.iter().map(Vec::len).max().unwrap_or(0);
        AssignmentPlan {
            s_matrix: matrix,
            s_sets: sets,
            a,
            ..self.clone()
        }
    }
}

impl fmt::Display for AssignmentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "e={} p={} n={} blocks={} a={}",
            self.e, self.p, self.n, self.blocks, self.a
        )?;
        writeln!(f, "I_w:")?;
        write!(f, "{}", self.w_matrix)?;
        writeln!(f, "I_s:")?;
        write!(f, "{}", self.s_matrix)?;
        for j in 0..self.e {
            writeln!(f, "EN {}: blocks {:?} shares {:?}", j + 1, self.w_sets[j], self.s_sets[j])?;
        }
        Ok(())
    }
}

/// True iff, for every share index `h` in `[n]`, the nodes holding `S^(h)`
/// together hold every block of `W`.
pub fn coverage_check(plan: &AssignmentPlan) -> bool {
    (1..=plan.n).all(|h| {
        let covered: BTreeSet<usize> = (0..plan.e)
            .filter(|&j| plan.s_sets[j].contains(&h))
            .flat_map(|j| plan.w_sets[j].iter().copied())
            .collect();
        covered.len() == plan.blocks && covered.iter().all(|&l| (1..=plan.blocks).contains(&l))
    })
}
