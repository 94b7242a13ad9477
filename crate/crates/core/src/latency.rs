//! Normalized latency model: upload schedule, compute chains, download cost
//! with cooperative transmission, decoding cost, and the closed-form total
//! for the stop-then-download scheme.
//!
//! All times are normalized by `τ`, the time an edge node needs for one
//! inner product per user.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::AssignmentPlan;
use crate::rs::decoding_cost_ops;
use crate::sss::DecodeEvent;
use crate::{Error, Result};

/// Global model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub e_max: usize,
    /// Storage fraction of `W` available at each node.
    pub mu: f64,
    pub tau: f64,
    /// Rate of the exponential setup time.
    pub eta: f64,
    /// User slowdown relative to an edge node, per inner product.
    pub delta: f64,
    /// Normalized time to unicast one field symbol per user.
    pub gamma: f64,
    pub m: usize,
    pub r: usize,
    /// Number of users; `None` means "at least as many as nodes".
    pub users: Option<usize>,
    pub q: u64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            e_max: 9,
            mu: 2.0 / 3.0,
            tau: 0.0005,
            eta: 0.5,
            delta: 3.0,
            gamma: 1.0,
            m: 600,
            r: 50,
            users: None,
            q: crate::field::DEFAULT_MODULUS,
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return bad("mu must lie in (0, 1]");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be nonnegative");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be nonnegative");
        }
        if self.m == 0 || self.r == 0 || self.e_max == 0 || self.users == Some(0) {
            return bad("m, r, e_max and users must be at least 1");
        }
        crate::field::Field::new(self.q)?;
        Ok(())
    }

    /// Users served per cooperative transmission cap, defaulting to `e`.
    pub fn users_for(&self, e: usize) -> f64 {
        self.users.unwrap_or(e) as f64
    }

    /// `⌊μ·x⌋`, tolerant of the rounding in fractions such as 2/3.
    pub fn storage_blocks(&self, x: usize) -> usize {
        (self.mu * x as f64 + 1e-9).floor() as usize
    }

    /// Normalized user time per field operation, `δ/(2r-1)`.
    pub fn op_time(&self) -> f64 {
        self.delta / (2 * self.r - 1) as f64
    }
}

/// Setup times of the contacted nodes, in absolute time units.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupTimes {
    lambda: Vec<f64>,
}

impl SetupTimes {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|&l| l.is_nan() || l < 0.0 || !l.is_finite()) {
            return Err(Error::InvalidParams("setup times must be finite and nonnegative".into()));
        }
        Ok(SetupTimes { lambda })
    }

    pub fn zeros(e: usize) -> Self {
        SetupTimes { lambda: vec![0.0; e] }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// The first `e` entries, for evaluating a smaller deployment on the
    /// same draw.
    pub fn truncated(&self, e: usize) -> SetupTimes {
        SetupTimes {
            lambda: self.lambda[..e].to_vec(),
        }
    }

    /// `λ_j / τ` for node `j` (0-based).
    pub fn normalized(&self, j: usize, tau: f64) -> f64 {
        self.lambda[j] / tau
    }
}

/// Draws `e` i.i.d. exponential setup times, `λ = -ln(U)/η` with `U` in `(0, 1]`.
pub fn sample_setup_times<R: Rng + ?Sized>(e: usize, eta: f64, rng: &mut R) -> SetupTimes {
    let lambda = (0..e)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>();
            -u.ln() / eta
        })
        .collect();
    SetupTimes { lambda }
}

/// Independent stream for Monte Carlo trial `trial` (seeded with `seed ^ trial`).
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ trial)
}

/// Setup draw of trial `trial` for `e_max` nodes; every deployment size uses
/// a prefix of it, so comparisons across tuples share the same randomness.
pub fn trial_setup(seed: u64, trial: u64, e_max: usize, eta: f64) -> SetupTimes {
    sample_setup_times(e_max, eta, &mut trial_rng(seed, trial))
}

/// Time at which node `j` (1-based) holds its `h'`-th share matrix (1-based)
/// under the round-robin unicast schedule: `γ r (e(h'-1) + j)`.
pub fn upload_arrival(j: usize, h_prime: usize, gamma: f64, r: usize, e: usize) -> f64 {
    upload_slot_time(e * (h_prime - 1) + j, gamma, r)
}

fn upload_slot_time(slot: usize, gamma: f64, r: usize) -> f64 {
    gamma * r as f64 * slot as f64
}

/// Arrival times of every share at every node. The users unicast one share
/// matrix per node in round-robin order, first shares first; nodes that
/// hold fewer shares are skipped in later rounds, so with equal counts this
/// is exactly [`upload_arrival`].
pub fn upload_schedule(share_counts: &[usize], gamma: f64, r: usize) -> Vec<Vec<f64>> {
    let rounds = share_counts.iter().copied().max().unwrap_or(0);
    let mut out: Vec<Vec<f64>> = share_counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    let mut slot = 0;
    for round in 0..rounds {
        for (j, &count) in share_counts.iter().enumerate() {
            if round < count {
                slot += 1;
                out[j].push(upload_slot_time(slot, gamma, r));
            }
        }
    }
    out
}

/// Completion time of the whole upload phase.
pub fn upload_end(share_counts: &[usize], gamma: f64, r: usize) -> f64 {
    upload_slot_time(share_counts.iter().sum(), gamma, r)
}

/// Start times of a node's share batches: the first starts after the setup
/// time, each later one when both the previous batch is done and its share
/// has arrived.
pub fn compute_start_times(arrivals: &[f64], setup_normalized: f64, batch_work: f64) -> Vec<f64> {
    let mut starts: Vec<f64> = Vec::with_capacity(arrivals.len());
    for (i, &arr) in arrivals.iter().enumerate() {
        let s = if i == 0 {
            setup_normalized + arr
        } else {
            (starts[i - 1] + batch_work).max(arr)
        };
        starts.push(s);
    }
    starts
}

/// Completion time of the `pos`-th (0-based) product of a batch.
#[inline]
pub fn ir_completion(batch_start: f64, pos: usize, block_work: f64) -> f64 {
    batch_start + (pos + 1) as f64 * block_work
}

/// Cost of downloading one product computed by `rho` nodes.
#[inline]
pub fn transmission_time(rho: u32, gamma: f64, block_rows: f64, users: f64) -> f64 {
    gamma * block_rows / (rho as f64).min(users)
}

/// Download latency of the selected products with multiplicities `rhos`.
pub fn download_latency(rhos: &[u32], gamma: f64, block_rows: f64, users: f64) -> f64 {
    rhos.iter().map(|&rho| transmission_time(rho, gamma, block_rows, users)).sum()
}

/// Indices of the `k` largest entries of `rho` (positive entries only),
/// ties toward smaller index. `None` if fewer than `k` are positive.
pub fn top_k_by_multiplicity(rho: &[u32], k: usize) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = (0..rho.len()).filter(|&h| rho[h] > 0).collect();
    if idx.len() < k {
        return None;
    }
    idx.sort_by(|&a, &b| rho[b].cmp(&rho[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Some(idx)
}

/// User-side decoding latency for one `(n, k)` codeword per row of `W`:
/// `δ/(2r-1) · m · ops(n, k)`; zero when `n = 1`.
pub fn decode_latency(n: usize, k: usize, m: usize, r: usize, delta: f64) -> Result<f64> {
    let ops = decoding_cost_ops(n, k)?;
    Ok(delta / (2 * r - 1) as f64 * m as f64 * ops)
}

/// Per-trial latency breakdown.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialOutcome {
    pub upload_end: f64,
    /// Time the last needed product finished computing.
    pub compute_end: f64,
    pub download_end: f64,
    pub decode_time: f64,
    pub total: f64,
    /// Downloaded products `(block, share)`, 0-based, in transmission order.
    pub downloaded: Vec<(usize, usize)>,
    /// Component decodes of the coded-`W` variant.
    pub decode_events: Vec<DecodeEvent>,
}

/// One computed product in the stop-then-download scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Completion {
    pub time: f64,
    pub node: usize,
    pub block: usize,
    pub share: usize,
}

/// Every product a full run would compute, with its completion time.
/// Blocks and shares are 0-based.
pub(crate) fn all_completions(plan: &AssignmentPlan, cfg: &SystemConfig, setup: &SetupTimes) -> Vec<Completion> {
    let block_work = cfg.m as f64 / plan.blocks as f64;
    let batch_work = plan.p as f64 * block_work;
    let counts: Vec<usize> = plan.s_sets.iter().map(Vec::len).collect();
    let arrivals = upload_schedule(&counts, cfg.gamma, cfg.r);
    let mut out = Vec::new();
    for j in 0..plan.e {
        let starts = compute_start_times(&arrivals[j], setup.normalized(j, cfg.tau), batch_work);
        for (slot, &h) in plan.s_sets[j].iter().enumerate() {
            for (pos, &l) in plan.w_sets[j].iter().enumerate() {
                out.push(Completion {
                    time: ir_completion(starts[slot], pos, block_work),
                    node: j,
                    block: l - 1,
                    share: h - 1,
                });
            }
        }
    }
    out
}

/// Largest stopping threshold every block can reach.
pub fn scheme1_max_t(plan: &AssignmentPlan) -> usize {
    (1..=plan.blocks).map(|l| plan.block_load(l)).min().unwrap_or(0)
}

/// Stop time for threshold `t`: every block needs `t` products (duplicates
/// counted) and `k` distinct shares. `per_block` holds each block's
/// completions sorted by time.
fn stop_time(per_block: &[Vec<Completion>], k: usize, t: usize, n: usize, seen: &mut Vec<bool>) -> Result<f64> {
    let mut stop = f64::NEG_INFINITY;
    for list in per_block {
        if list.len() < t {
            return Err(Error::InfeasibleT { t });
        }
        seen.clear();
        seen.resize(n, false);
        let mut distinct = 0;
        let mut kth = None;
        for c in list {
            if !seen[c.share] {
                seen[c.share] = true;
                distinct += 1;
                if distinct == k {
                    kth = Some(c.time);
                    break;
                }
            }
        }
        let kth = kth.ok_or(Error::InfeasibleT { t })?;
        stop = stop.max(kth).max(list[t - 1].time);
    }
    Ok(stop)
}

fn by_block(plan: &AssignmentPlan, mut comps: Vec<Completion>) -> Vec<Vec<Completion>> {
    comps.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.node.cmp(&b.node)));
    let mut per_block = vec![Vec::new(); plan.blocks];
    for c in comps {
        per_block[c.block].push(c);
    }
    per_block
}

/// Download and decode given a stop time: per block, the `k` products of
/// largest multiplicity among those finished by `stop`.
pub(crate) fn scheme1_finish(
    plan: &AssignmentPlan,
    cfg: &SystemConfig,
    k: usize,
    per_block: &[Vec<Completion>],
    stop: f64,
    rho: &mut Vec<u32>,
    downloaded: Option<&mut Vec<(usize, usize)>>,
) -> Result<(f64, f64)> {
    let block_rows = cfg.m as f64 / plan.blocks as f64;
    let users = cfg.users_for(plan.e);
    let mut comm = 0.0;
    let mut chosen = Vec::new();
    for (l, list) in per_block.iter().enumerate() {
        rho.clear();
        rho.resize(plan.n, 0);
        for c in list.iter().take_while(|c| c.time <= stop) {
            rho[c.share] += 1;
        }
        let top = top_k_by_multiplicity(rho, k).ok_or(Error::InfeasibleT { t: k })?;
        for h in top {
            comm += transmission_time(rho[h], cfg.gamma, block_rows, users);
            chosen.push((l, h));
        }
    }
    if let Some(d) = downloaded {
        *d = chosen;
    }
    let dec = decode_latency(plan.n, k, cfg.m, cfg.r, cfg.delta)?;
    Ok((comm, dec))
}

/// Closed-form latency of the stop-then-download scheme: computing stops
/// once every block has `t` products and `k` distinct shares, then the `k`
/// highest-multiplicity products of each block are downloaded and decoded.
pub fn scheme1_total_latency(
    plan: &AssignmentPlan,
    cfg: &SystemConfig,
    setup: &SetupTimes,
    k: usize,
    t: usize,
) -> Result<TrialOutcome> {
    if k == 0 || k > plan.n || t < k {
        return Err(Error::InvalidParams(format!("need 1 <= k <= n and t >= k, got k={k}, t={t}")));
    }
    let per_block = by_block(plan, all_completions(plan, cfg, setup));
    let stop = stop_time(&per_block, k, t, plan.n, &mut Vec::new())?;
    let mut downloaded = Vec::new();
    let (comm, dec) = scheme1_finish(plan, cfg, k, &per_block, stop, &mut Vec::new(), Some(&mut downloaded))?;
    let counts: Vec<usize> = plan.s_sets.iter().map(Vec::len).collect();
    Ok(TrialOutcome {
        upload_end: upload_end(&counts, cfg.gamma, cfg.r),
        compute_end: stop,
        download_end: stop + comm,
        decode_time: dec,
        total: stop + comm + dec,
        downloaded,
        decode_events: Vec::new(),
    })
}

/// Totals for every threshold `t` in `k..=t_max` on one setup draw.
pub fn scheme1_totals_all_t(
    plan: &AssignmentPlan,
    cfg: &SystemConfig,
    setup: &SetupTimes,
    k: usize,
    t_max: usize,
) -> Result<Vec<f64>> {
    let per_block = by_block(plan, all_completions(plan, cfg, setup));
    let mut seen = Vec::new();
    let mut rho = Vec::new();
    (k..=t_max)
        .map(|t| {
            let stop = stop_time(&per_block, k, t, plan.n, &mut seen)?;
            let (comm, dec) = scheme1_finish(plan, cfg, k, &per_block, stop, &mut rho, None)?;
            Ok(stop + comm + dec)
        })
        .collect()
}
