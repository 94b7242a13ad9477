//! Monte Carlo grid search over private coding schemes.
//!
//! Every trial index draws one set of setup times for `e_max` nodes, and
//! every candidate scheme evaluates the same draw (common random numbers),
//! so differences between candidates are not drowned by sampling noise.

use std::fmt;

use rayon::prelude::*;

use crate::assignment::{coverage_check, AssignmentPlan};
use crate::latency::{
    scheme1_max_t, scheme1_total_latency, scheme1_totals_all_t, trial_setup, SetupTimes, SystemConfig, TrialOutcome,
};
use crate::sim::{full_pattern_decodable, replay_scheme1, QueueSimulator, TraceLine};
use crate::{Error, Result};

/// Scheme variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Stop computing at a threshold, then download.
    StopThenDownload,
    /// Download concurrently through a multiplicity-ordered queue.
    Queue,
    /// Queue plus a Reed-Solomon code on `W`.
    CodedQueue,
}

impl Variant {
    pub fn number(self) -> u8 {
        match self {
            Variant::StopThenDownload => 1,
            Variant::Queue => 2,
            Variant::CodedQueue => 3,
        }
    }

    pub fn from_number(v: u8) -> Option<Self> {
        match v {
            1 => Some(Variant::StopThenDownload),
            2 => Some(Variant::Queue),
            3 => Some(Variant::CodedQueue),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One point of the design space. For the uncoded variants `n_prime` and
/// `k_prime` equal `e`; `t` is set only for the stop-then-download variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrivateCodingScheme {
    pub variant: Variant,
    pub e: usize,
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub n_prime: usize,
    pub k_prime: usize,
    pub t: Option<usize>,
    pub z: usize,
}

impl PrivateCodingScheme {
    pub fn plan(&self) -> Result<AssignmentPlan> {
        match self.variant {
            Variant::CodedQueue => AssignmentPlan::coded(self.e, self.p, self.n, self.n_prime),
            _ => AssignmentPlan::uncoded(self.e, self.p, self.n),
        }
    }

    /// Checks storage, privacy, recoverability and threshold constraints.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<AssignmentPlan> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.e < 2 || self.e > cfg.e_max {
            return bad(format!("e={} outside [2, {}]", self.e, cfg.e_max));
        }
        if self.z == 0 {
            return bad("z must be at least 1".into());
        }
        let storage_base = match self.variant {
            Variant::CodedQueue => self.k_prime,
            _ => self.e,
        };
        if self.p == 0 || self.p > cfg.storage_blocks(storage_base) || self.p > self.e {
            return bad(format!("p={} violates the storage bound", self.p));
        }
        if self.variant != Variant::CodedQueue && (self.n_prime != self.e || self.k_prime != self.e) {
            return bad("uncoded variants use n' = k' = e".into());
        }
        if self.variant != Variant::CodedQueue && self.n > self.e {
            return bad(format!("n={} exceeds e={}", self.n, self.e));
        }
        if self.k_prime == 0 || self.k_prime > self.n_prime {
            return bad(format!("need 1 <= k' <= n', got ({}, {})", self.n_prime, self.k_prime));
        }
        let plan = self.plan()?;
        if self.k != plan.a * self.z + 1 || self.k > self.n {
            return bad(format!("k={} must equal a*z+1={} and not exceed n={}", self.k, plan.a * self.z + 1, self.n));
        }
        match self.variant {
            Variant::StopThenDownload => {
                let t = self.t.ok_or_else(|| Error::InvalidParams("threshold t missing".into()))?;
                if t < self.k || t > scheme1_max_t(&plan) {
                    return Err(Error::InfeasibleT { t });
                }
                if !coverage_check(&plan) {
                    return bad("assignment does not cover every block".into());
                }
            }
            Variant::Queue => {
                if self.t.is_some() {
                    return bad("t only applies to the stop-then-download variant".into());
                }
                if !coverage_check(&plan) {
                    return bad("assignment does not cover every block".into());
                }
            }
            Variant::CodedQueue => {
                if self.t.is_some() {
                    return bad("t only applies to the stop-then-download variant".into());
                }
                if !full_pattern_decodable(&plan, self.k, self.k_prime) {
                    return bad("full computation does not recover the product code".into());
                }
            }
        }
        Ok(plan)
    }

    /// One trial on the given setup draw (only the first `e` entries used).
    pub fn simulate(
        &self,
        cfg: &SystemConfig,
        setup: &SetupTimes,
        trace: Option<&mut Vec<TraceLine>>,
    ) -> Result<TrialOutcome> {
        let plan = self.validate(cfg)?;
        let setup = setup.truncated(self.e);
        match self.variant {
            Variant::StopThenDownload => {
                let t = self.t.expect("validated");
                match trace {
                    Some(tr) => replay_scheme1(&plan, cfg, &setup, self.k, t, Some(tr)),
                    None => scheme1_total_latency(&plan, cfg, &setup, self.k, t),
                }
            }
            Variant::Queue => QueueSimulator::uncoded(&plan, self.k, cfg)?.run(&setup, trace),
            Variant::CodedQueue => QueueSimulator::coded(&plan, self.k, self.k_prime, cfg)?.run(&setup, trace),
        }
    }
}

impl fmt::Display for PrivateCodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scheme {} e={} p={} n={} k={} n'={} k'={} z={}",
            self.variant, self.e, self.p, self.n, self.k, self.n_prime, self.k_prime, self.z
        )?;
        if let Some(t) = self.t {
            write!(f, " t={t}")?;
        }
        Ok(())
    }
}

/// Parameter ranges of a search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    pub variant: Variant,
    pub z: usize,
    pub e_min: usize,
    pub e_max: usize,
    /// Coded variant: largest `n` and `n'` as an offset over `e`, further
    /// limited to `e + p`.
    pub coded_extra: usize,
}

impl SearchSpace {
    pub fn new(variant: Variant, z: usize, cfg: &SystemConfig) -> Self {
        SearchSpace {
            variant,
            z,
            e_min: 2,
            e_max: cfg.e_max,
            coded_extra: usize::MAX,
        }
    }
}

/// Candidates sharing one assignment plan; the stop-then-download variant
/// spans a range of thresholds.
#[derive(Debug, Clone)]
struct Family {
    scheme: PrivateCodingScheme,
    plan: AssignmentPlan,
    thresholds: Option<(usize, usize)>,
}

impl Family {
    fn members(&self) -> Vec<PrivateCodingScheme> {
        match self.thresholds {
            Some((lo, hi)) => (lo..=hi)
                .map(|t| PrivateCodingScheme {
                    t: Some(t),
                    ..self.scheme.clone()
                })
                .collect(),
            None => vec![self.scheme.clone()],
        }
    }
}

fn uncoded_family(variant: Variant, e: usize, p: usize, n: usize, z: usize) -> Result<Option<Family>> {
    let plan = AssignmentPlan::uncoded(e, p, n)?;
    let k = plan.a * z + 1;
    if k > n || !coverage_check(&plan) {
        return Ok(None);
    }
    let thresholds = if variant == Variant::StopThenDownload {
        let hi = scheme1_max_t(&plan);
        if hi < k {
            return Ok(None);
        }
        Some((k, hi))
    } else {
        None
    };
    Ok(Some(Family {
        scheme: PrivateCodingScheme {
            variant,
            e,
            p,
            n,
            k,
            n_prime: e,
            k_prime: e,
            t: None,
            z,
        },
        plan,
        thresholds,
    }))
}

fn families(space: &SearchSpace, cfg: &SystemConfig) -> Result<Vec<Family>> {
    if space.z == 0 || space.e_min < 2 || space.e_max > cfg.e_max {
        return Err(Error::InvalidParams(format!(
            "invalid search space: z={}, e in [{}, {}], e_max={}",
            space.z, space.e_min, space.e_max, cfg.e_max
        )));
    }
    let mut out = Vec::new();
    for e in space.e_min..=space.e_max {
        match space.variant {
            Variant::StopThenDownload | Variant::Queue => {
                for p in 1..=cfg.storage_blocks(e).min(e) {
                    for n in 1..=e {
                        if let Some(f) = uncoded_family(space.variant, e, p, n, space.z)? {
                            out.push(f);
                        }
                    }
                }
            }
            Variant::CodedQueue => {
                for k_prime in 1..=e {
                    for p in 1..=cfg.storage_blocks(k_prime).min(e) {
                        let cap = e + p.min(space.coded_extra);
                        for n_prime in k_prime.max(p)..=cap {
                            for n in 1..=cap.min(64) {
                                let plan = AssignmentPlan::coded(e, p, n, n_prime)?;
                                let k = plan.a * space.z + 1;
                                if k > n || !full_pattern_decodable(&plan, k, k_prime) {
                                    continue;
                                }
                                out.push(Family {
                                    scheme: PrivateCodingScheme {
                                        variant: Variant::CodedQueue,
                                        e,
                                        p,
                                        n,
                                        k,
                                        n_prime,
                                        k_prime,
                                        t: None,
                                        z: space.z,
                                    },
                                    plan,
                                    thresholds: None,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All feasible schemes of a search space, in enumeration order
/// (`e`, then `p` or `k'`, then `n'`, `n`, `t`).
pub fn enumerate_feasible(space: &SearchSpace, cfg: &SystemConfig) -> Result<Vec<PrivateCodingScheme>> {
    let all: Vec<_> = families(space, cfg)?.iter().flat_map(Family::members).collect();
    if all.is_empty() {
        return Err(Error::EmptySpace);
    }
    Ok(all)
}

/// Running statistics of one candidate.
#[derive(Debug, Clone, Default, PartialEq)]
struct Accum {
    n: u64,
    mean: f64,
    m2: f64,
    exceed: Vec<u64>,
}

impl Accum {
    fn new(deadlines: usize) -> Self {
        Accum {
            exceed: vec![0; deadlines],
            ..Default::default()
        }
    }

    fn push(&mut self, v: f64, deadlines: &[f64]) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
        for (c, &dl) in self.exceed.iter_mut().zip(deadlines) {
            if v > dl {
                *c += 1;
            }
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

enum Runner {
    Threshold { plan: AssignmentPlan, k: usize, t_max: usize },
    Queue(Box<QueueSimulator>),
}

impl Runner {
    fn new(f: &Family, cfg: &SystemConfig) -> Result<Self> {
        let s = &f.scheme;
        Ok(match s.variant {
            Variant::StopThenDownload => Runner::Threshold {
                plan: f.plan.clone(),
                k: s.k,
                t_max: f.thresholds.expect("threshold family").1,
            },
            Variant::Queue => Runner::Queue(Box::new(QueueSimulator::uncoded(&f.plan, s.k, cfg)?)),
            Variant::CodedQueue => Runner::Queue(Box::new(QueueSimulator::coded(&f.plan, s.k, s.k_prime, cfg)?)),
        })
    }

    fn run(&mut self, cfg: &SystemConfig, setup: &SetupTimes, acc: &mut [Accum], deadlines: &[f64]) -> Result<()> {
        match self {
            Runner::Threshold { plan, k, t_max } => {
                let totals = scheme1_totals_all_t(plan, cfg, setup, *k, *t_max)?;
                for (a, v) in acc.iter_mut().zip(totals) {
                    a.push(v, deadlines);
                }
            }
            Runner::Queue(sim) => acc[0].push(sim.total(setup)?, deadlines),
        }
        Ok(())
    }
}

/// Extends a family's statistics with trials `from..to`.
fn run_family(f: &Family, cfg: &SystemConfig, acc: &mut [Accum], from: u64, to: u64, deadlines: &[f64]) -> Result<()> {
    let mut runner = Runner::new(f, cfg)?;
    for trial in from..to {
        let setup = trial_setup(cfg.seed, trial, cfg.e_max, cfg.eta).truncated(f.scheme.e);
        runner.run(cfg, &setup, acc, deadlines)?;
    }
    Ok(())
}

/// What a search minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    MeanLatency,
    /// Probability that the total latency exceeds the deadline; ties by mean.
    Exceedance(f64),
}

/// A screening stage: evaluate every surviving candidate with `trials`
/// trials, then keep the best `keep` (per deadline for deadline searches).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Screening {
    pub trials: u64,
    pub keep: usize,
}

/// Monte Carlo settings. Without screening stages the search is exhaustive
/// at `trials` trials per candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOptions {
    pub trials: u64,
    pub screening: Vec<Screening>,
}

impl SearchOptions {
    pub fn exhaustive(trials: u64) -> Self {
        SearchOptions {
            trials,
            screening: Vec::new(),
        }
    }
}

/// Statistics of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleResult {
    pub scheme: PrivateCodingScheme,
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    /// Exceedance probabilities for the requested deadlines.
    pub exceedance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: TupleResult,
    /// Every evaluated candidate in enumeration order.
    pub table: Vec<TupleResult>,
}

/// Exceedance probability at one deadline and the scheme achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlinePoint {
    pub deadline: f64,
    pub probability: f64,
    pub best: TupleResult,
}

struct Evaluated {
    families: Vec<Family>,
    accs: Vec<Vec<Accum>>,
    alive: Vec<bool>,
}

fn candidate_key(s: &PrivateCodingScheme) -> (usize, usize) {
    (s.e, s.n)
}

/// Rank of candidate `(fi, mi)` under `objective`: smaller is better; ties
/// go to smaller `e`, then smaller `n`, then enumeration order.
fn better(a: (&Accum, &PrivateCodingScheme, usize), b: (&Accum, &PrivateCodingScheme, usize), obj: usize) -> bool {
    let (aa, sa, ia) = a;
    let (ab, sb, ib) = b;
    let primary = if obj == usize::MAX {
        aa.mean.total_cmp(&ab.mean)
    } else {
        // Compare exceedance fractions exactly: c_a / n_a vs c_b / n_b.
        (aa.exceed[obj] as u128 * ab.n as u128)
            .cmp(&(ab.exceed[obj] as u128 * aa.n as u128))
            .then(aa.mean.total_cmp(&ab.mean))
    };
    primary
        .then(candidate_key(sa).cmp(&candidate_key(sb)))
        .then(ia.cmp(&ib))
        .is_lt()
}

fn evaluate(
    space: &SearchSpace,
    cfg: &SystemConfig,
    opts: &SearchOptions,
    deadlines: &[f64],
    objectives: &[usize],
) -> Result<Evaluated> {
    cfg.validate()?;
    if opts.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let families = families(space, cfg)?;
    if families.is_empty() {
        return Err(Error::EmptySpace);
    }
    let members: Vec<Vec<PrivateCodingScheme>> = families.iter().map(Family::members).collect();
    let mut accs: Vec<Vec<Accum>> = members
        .iter()
        .map(|m| vec![Accum::new(deadlines.len()); m.len()])
        .collect();
    let mut alive = vec![true; families.len()];
    let mut done = 0u64;
    let mut stages: Vec<(u64, Option<usize>)> = opts
        .screening
        .iter()
        .filter(|s| s.trials < opts.trials)
        .map(|s| (s.trials, Some(s.keep)))
        .collect();
    stages.push((opts.trials, None));
    for (target, keep) in stages {
        if target > done {
            let jobs: Vec<usize> = (0..families.len()).filter(|&i| alive[i]).collect();
            let updated: Vec<Result<(usize, Vec<Accum>)>> = jobs
                .par_iter()
                .map(|&i| {
                    let mut acc = accs[i].clone();
                    run_family(&families[i], cfg, &mut acc, done, target, deadlines)?;
                    Ok((i, acc))
                })
                .collect();
            for r in updated {
                let (i, acc) = r?;
                accs[i] = acc;
            }
            done = target;
        }
        let Some(keep) = keep else { break };
        let mut survivors = vec![false; families.len()];
        for &obj in objectives {
            let mut ranked: Vec<(usize, usize)> = (0..families.len())
                .filter(|&i| alive[i])
                .flat_map(|i| (0..members[i].len()).map(move |m| (i, m)))
                .collect();
            let idx = |&(i, m): &(usize, usize)| (&accs[i][m], &members[i][m], i * 1024 + m);
            ranked.sort_by(|a, b| {
                if better(idx(a), idx(b), obj) {
                    std::cmp::Ordering::Less
                } else if better(idx(b), idx(a), obj) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            });
            for &(i, _) in ranked.iter().take(keep.max(1)) {
                survivors[i] = true;
            }
        }
        alive = survivors;
    }
    Ok(Evaluated { families, accs, alive })
}

impl Evaluated {
    fn table(&self) -> Vec<TupleResult> {
        self.families
            .iter()
            .zip(&self.accs)
            .flat_map(|(f, accs)| {
                f.members().into_iter().zip(accs.iter()).map(|(scheme, a)| TupleResult {
                    scheme,
                    mean: a.mean,
                    stderr: a.stderr(),
                    trials: a.n,
                    exceedance: a.exceed.iter().map(|&c| c as f64 / a.n as f64).collect(),
                })
            })
            .collect()
    }

    /// Best surviving candidate under objective `obj`, as a table index.
    fn best(&self, obj: usize) -> usize {
        let mut best: Option<(usize, usize, usize)> = None;
        let mut flat = 0;
        for (i, f) in self.families.iter().enumerate() {
            let members = f.members();
            for m in 0..members.len() {
                if self.alive[i] {
                    let take = match best {
                        None => true,
                        Some((bi, bm, _)) => better(
                            (&self.accs[i][m], &members[m], i * 1024 + m),
                            (&self.accs[bi][bm], &self.families[bi].members()[bm], bi * 1024 + bm),
                            obj,
                        ),
                    };
                    if take {
                        best = Some((i, m, flat));
                    }
                }
                flat += 1;
            }
        }
        best.expect("at least one survivor").2
    }
}

/// Minimizes mean total latency (or exceedance of a deadline) over the
/// search space.
pub fn optimize(
    space: &SearchSpace,
    cfg: &SystemConfig,
    opts: &SearchOptions,
    objective: Objective,
) -> Result<OptimizationResult> {
    let (deadlines, obj) = match objective {
        Objective::MeanLatency => (Vec::new(), usize::MAX),
        Objective::Exceedance(d) => (vec![d], 0),
    };
    let ev = evaluate(space, cfg, opts, &deadlines, &[obj])?;
    let table = ev.table();
    let best = table[ev.best(obj)].clone();
    Ok(OptimizationResult { best, table })
}

/// For each deadline, the smallest exceedance probability over the search
/// space and the scheme achieving it. With screening, survivors of all
/// deadlines form one shared final set, so the profile is nonincreasing.
pub fn deadline_profile(
    space: &SearchSpace,
    cfg: &SystemConfig,
    deadlines: &[f64],
    opts: &SearchOptions,
) -> Result<(Vec<DeadlinePoint>, Vec<TupleResult>)> {
    if deadlines.is_empty() {
        return Err(Error::InvalidParams("deadline grid is empty".into()));
    }
    let objectives: Vec<usize> = (0..deadlines.len()).collect();
    let ev = evaluate(space, cfg, opts, deadlines, &objectives)?;
    let table = ev.table();
    let points = objectives
        .iter()
        .map(|&o| {
            let best = table[ev.best(o)].clone();
            DeadlinePoint {
                deadline: deadlines[o],
                probability: best.exceedance[o],
                best,
            }
        })
        .collect();
    Ok((points, table))
}

/// Monte Carlo statistics of a single scheme.
pub fn evaluate_scheme(
    scheme: &PrivateCodingScheme,
    cfg: &SystemConfig,
    trials: u64,
    deadlines: &[f64],
) -> Result<TupleResult> {
    cfg.validate()?;
    let plan = scheme.validate(cfg)?;
    let family = Family {
        scheme: PrivateCodingScheme { t: None, ..scheme.clone() },
        thresholds: scheme.t.map(|t| (t, t)),
        plan,
    };
    let mut acc = vec![Accum::new(deadlines.len())];
    if let Some(t) = scheme.t {
        // Evaluate the one threshold through the closed form.
        let mut a = Accum::new(deadlines.len());
        for trial in 0..trials {
            let setup = trial_setup(cfg.seed, trial, cfg.e_max, cfg.eta).truncated(scheme.e);
            a.push(scheme1_total_latency(&family.plan, cfg, &setup, scheme.k, t)?.total, deadlines);
        }
        acc[0] = a;
    } else {
        run_family(&family, cfg, &mut acc, 0, trials, deadlines)?;
    }
    let a = &acc[0];
    Ok(TupleResult {
        scheme: scheme.clone(),
        mean: a.mean,
        stderr: a.stderr(),
        trials: a.n,
        exceedance: a.exceed.iter().map(|&c| c as f64 / a.n as f64).collect(),
    })
}
