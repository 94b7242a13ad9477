//! Nonprivate comparison scheme: broadcast upload, an MDS code over the
//! rows of `W` with cyclic replication, and one long-code decode per user.
//!
//! Only the broadcast upload cost and the long-code decoding cost are pinned
//! down; the row layout and the stopping rule are a reconstruction.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use crate::latency::{top_k_by_multiplicity, transmission_time, SetupTimes, SystemConfig, TrialOutcome};
use crate::rs::decoding_cost_ops;
use crate::{Error, Result};

/// Base of the logarithm in the broadcast cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// Code and storage layout of the baseline.
///
/// The `n_c` distinct coded rows are split into `e` nearly equal groups and
/// node `j` stores groups `j, j+1, .., j+replication-1` (cyclically), in
/// that processing order.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub e: usize,
    /// Code dimension: coded rows needed to recover `W x`.
    pub k_c: usize,
    /// Code length: distinct coded rows.
    pub n_c: usize,
    pub replication: usize,
    pub log_base: LogBase,
}

impl BaselineConfig {
    /// `⌊μ m e⌋` coded rows, dimension `m`, no replication.
    pub fn for_system(cfg: &SystemConfig, e: usize) -> Self {
        BaselineConfig {
            e,
            k_c: cfg.m,
            n_c: (cfg.mu * (cfg.m * e) as f64 + 1e-9).floor() as usize,
            replication: 1,
            log_base: LogBase::Natural,
        }
    }

    /// Same storage, each coded row held by `replication` nodes; every
    /// group gets `⌊μ m / replication⌋` rows.
    pub fn with_replication(cfg: &SystemConfig, e: usize, replication: usize) -> Self {
        let mut b = Self::for_system(cfg, e);
        let cap = (cfg.mu * cfg.m as f64 + 1e-9).floor() as usize;
        b.replication = replication;
        b.n_c = cap.checked_div(replication).map_or(0, |per| e * per);
        b
    }

    fn group_bounds(&self, g: usize) -> (usize, usize) {
        let (q, r) = (self.n_c / self.e, self.n_c % self.e);
        let start = g * q + g.min(r);
        (start, start + q + usize::from(g < r))
    }

    /// Coded rows stored at node `j`, in processing order.
    pub fn stored_rows(&self, j: usize) -> Vec<usize> {
        (0..self.replication)
            .flat_map(|i| {
                let (a, b) = self.group_bounds((j + i) % self.e);
                a..b
            })
            .collect()
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleConfig(m));
        if self.e < 2 {
            return bad(format!("broadcast needs e >= 2, got {}", self.e));
        }
        if self.k_c == 0 || self.k_c > self.n_c {
            return bad(format!("need 1 <= K_c <= N_c, got K_c={} N_c={}", self.k_c, self.n_c));
        }
        if self.replication == 0 || self.replication > self.e {
            return bad(format!("replication {} outside [1, {}]", self.replication, self.e));
        }
        let per_node = (0..self.e).map(|j| self.stored_rows(j).len()).max().unwrap_or(0);
        let cap = (cfg.mu * cfg.m as f64 + 1e-9).floor() as usize;
        if per_node > cap {
            return bad(format!("{per_node} rows per node exceed storage of {cap}"));
        }
        Ok(())
    }
}

/// Broadcasting each user's data to `e` nodes: `γ r log(e)`.
pub fn baseline_upload_latency(gamma: f64, r: usize, e: usize, base: LogBase) -> Result<f64> {
    if e < 2 {
        return Err(Error::InfeasibleConfig(format!("broadcast needs e >= 2, got {e}")));
    }
    Ok(gamma * r as f64 * base.log(e as f64))
}

/// One long-code decode per user.
pub fn baseline_decode_latency(bcfg: &BaselineConfig, cfg: &SystemConfig) -> Result<f64> {
    Ok(cfg.op_time() * decoding_cost_ops(bcfg.n_c, bcfg.k_c)?)
}

/// One trial. Each node computes one coded row per time unit after its
/// setup; computation stops once `K_c` distinct rows exist, and the `K_c`
/// rows with the largest multiplicity are then downloaded.
/// `downloaded` is left empty (rows, not products, are transferred).
pub fn baseline_total_latency(bcfg: &BaselineConfig, cfg: &SystemConfig, setup: &SetupTimes) -> Result<TrialOutcome> {
    bcfg.validate(cfg)?;
    if setup.len() < bcfg.e {
        return Err(Error::DimensionMismatch {
            expected: bcfg.e,
            got: setup.len(),
        });
    }
    let upload = baseline_upload_latency(cfg.gamma, cfg.r, bcfg.e, bcfg.log_base)?;
    let stored: Vec<Vec<usize>> = (0..bcfg.e).map(|j| bcfg.stored_rows(j)).collect();
    let starts: Vec<f64> = (0..bcfg.e).map(|j| upload + setup.normalized(j, cfg.tau)).collect();

    // Merge the nodes' row completions in time order until K_c distinct rows.
    let mut seen = vec![false; bcfg.n_c];
    let mut distinct = 0;
    let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();
    let key = |t: f64| t.to_bits();
    for j in 0..bcfg.e {
        if !stored[j].is_empty() {
            heap.push(Reverse((key(starts[j] + 1.0), j, 0)));
        }
    }
    let mut stop = f64::NAN;
    while let Some(Reverse((tk, j, i))) = heap.pop() {
        let row = stored[j][i];
        if !seen[row] {
            seen[row] = true;
            distinct += 1;
        }
        if i + 1 < stored[j].len() {
            heap.push(Reverse((key(starts[j] + (i + 2) as f64), j, i + 1)));
        }
        if distinct >= bcfg.k_c {
            stop = f64::from_bits(tk);
            break;
        }
    }
    if stop.is_nan() {
        return Err(Error::InfeasibleConfig("fewer than K_c distinct rows stored".into()));
    }

    let mut rho = vec![0u32; bcfg.n_c];
    for j in 0..bcfg.e {
        let done = if stop >= starts[j] + 1.0 {
            // Row i finishes at start + i + 1; count with the same arithmetic.
            let mut c = (stop - starts[j]).floor().max(0.0) as usize;
            while c > 0 && starts[j] + c as f64 > stop {
                c -= 1;
            }
            while starts[j] + (c + 1) as f64 <= stop {
                c += 1;
            }
            c.min(stored[j].len())
        } else {
            0
        };
        for &row in &stored[j][..done] {
            rho[row] += 1;
        }
    }
    let chosen = top_k_by_multiplicity(&rho, bcfg.k_c).expect("K_c distinct rows computed");
    let users = cfg.users_for(bcfg.e);
    let comm: f64 = chosen
        .iter()
        .map(|&row| transmission_time(rho[row], cfg.gamma, 1.0, users))
        .sum();
    let decode = baseline_decode_latency(bcfg, cfg)?;
    Ok(TrialOutcome {
        upload_end: upload,
        compute_end: stop,
        download_end: stop + comm,
        decode_time: decode,
        total: stop + comm + decode,
        ..Default::default()
    })
}
