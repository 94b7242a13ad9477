//! Command implementations. Each returns the bytes of its output.

use std::io::Write;

use edgeshare::baseline::{baseline_total_latency, BaselineConfig, LogBase};
use edgeshare::latency::{trial_setup, SystemConfig};
use edgeshare::optimizer::{
    deadline_profile, evaluate_scheme, optimize as search, Objective, PrivateCodingScheme, Screening, SearchOptions,
    SearchSpace, TupleResult, Variant,
};
use edgeshare::sim::TraceLine;

use crate::{CliError, SearchArgs};

/// Column layout shared by every table that names a scheme.
const TUPLE_COLUMNS: [&str; 9] = ["scheme", "e", "p", "n", "k", "n_prime", "k_prime", "t", "z"];

/// Scheme selector on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Private(Variant),
    Baseline,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse_schemes(s: &str) -> Result<Vec<SchemeChoice>, CliError> {
    s.split(',')
        .map(|p| match p.trim() {
            "baseline" | "b" => Ok(SchemeChoice::Baseline),
            v => v
                .parse::<u8>()
                .ok()
                .and_then(Variant::from_number)
                .map(SchemeChoice::Private)
                .ok_or_else(|| config_err(format!("unknown scheme {v:?}"))),
        })
        .collect()
}

pub fn parse_z_list(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|p| match p.trim().parse::<usize>() {
            Ok(z) if z >= 1 => Ok(z),
            _ => Err(config_err(format!("privacy level {p:?} must be a positive integer"))),
        })
        .collect()
}

/// `a,b,c` or inclusive `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| config_err(format!("bad grid value {v:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step <= 0.0 || b < a {
                return Err(config_err(format!("grid {s:?} needs start <= stop and step > 0")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            (0..=count).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(config_err(format!("grid {s:?} is neither a list nor start:stop:step"))),
    };
    if grid.is_empty() {
        return Err(config_err("empty grid"));
    }
    Ok(grid)
}

pub fn parse_screening(s: Option<&str>) -> Result<Vec<Screening>, CliError> {
    let Some(s) = s else { return Ok(Vec::new()) };
    s.split(',')
        .map(|stage| {
            let (t, k) = stage
                .split_once(':')
                .ok_or_else(|| config_err(format!("screening stage {stage:?} is not trials:keep")))?;
            match (t.trim().parse::<u64>(), k.trim().parse::<usize>()) {
                (Ok(trials), Ok(keep)) if trials > 0 && keep > 0 => Ok(Screening { trials, keep }),
                _ => Err(config_err(format!("bad screening stage {stage:?}"))),
            }
        })
        .collect()
}

/// A `--tuple` value.
#[derive(Debug, Clone, PartialEq)]
pub enum TupleArg {
    Private(PrivateCodingScheme),
    Baseline(BaselineConfig),
}

/// Parses `key=value` pairs. `k` defaults to `a z + 1`, `n_prime`/`k_prime`
/// to `e` and `z` to 1.
pub fn parse_tuple(s: &str, cfg: &SystemConfig) -> Result<TupleArg, CliError> {
    let mut kv = std::collections::BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| config_err(format!("tuple entry {part:?} is not key=value")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let scheme = kv.remove("scheme").ok_or_else(|| config_err("tuple needs scheme=..."))?;
    let mut take = |key: &str| -> Result<Option<usize>, CliError> {
        kv.remove(key)
            .map(|v| v.parse::<usize>().map_err(|_| config_err(format!("tuple {key}={v:?} is not an integer"))))
            .transpose()
    };
    let e = take("e")?.ok_or_else(|| config_err("tuple needs e=..."))?;
    let spec = match parse_schemes(&scheme)?.as_slice() {
        [SchemeChoice::Baseline] => {
            let replication = take("replication")?.unwrap_or(1);
            let mut b = BaselineConfig::with_replication(cfg, e, replication);
            if let Some(base) = take("log")? {
                b.log_base = match base {
                    2 => LogBase::Two,
                    _ => return Err(config_err("log must be 2 (default natural)")),
                };
            }
            b.validate(cfg)?;
            TupleArg::Baseline(b)
        }
        [SchemeChoice::Private(variant)] => {
            let p = take("p")?.ok_or_else(|| config_err("tuple needs p=..."))?;
            let n = take("n")?.ok_or_else(|| config_err("tuple needs n=..."))?;
            let z = take("z")?.unwrap_or(1);
            let n_prime = take("n_prime")?.unwrap_or(e);
            let k_prime = take("k_prime")?.unwrap_or(e);
            let t = take("t")?;
            let mut scheme = PrivateCodingScheme {
                variant: *variant,
                e,
                p,
                n,
                k: 0,
                n_prime,
                k_prime,
                t,
                z,
            };
            scheme.k = match take("k")? {
                Some(k) => k,
                None => scheme.plan()?.a * z + 1,
            };
            scheme.validate(cfg)?;
            TupleArg::Private(scheme)
        }
        _ => return Err(config_err("tuple takes exactly one scheme")),
    };
    if let Some(extra) = kv.keys().next() {
        return Err(config_err(format!("unknown tuple key {extra:?}")));
    }
    Ok(spec)
}

fn tuple_fields(s: &PrivateCodingScheme) -> Vec<String> {
    vec![
        s.variant.to_string(),
        s.e.to_string(),
        s.p.to_string(),
        s.n.to_string(),
        s.k.to_string(),
        s.n_prime.to_string(),
        s.k_prime.to_string(),
        s.t.map(|t| t.to_string()).unwrap_or_default(),
        s.z.to_string(),
    ]
}

/// Columns after `gamma, scheme, z` in the sweep and deadline tables.
const DESIGN_COLUMNS: [&str; 7] = ["e", "p", "n", "k", "n_prime", "k_prime", "t"];

/// Row `prefix, scheme, z, stats.., e, p, n, k, n', k', t`.
fn leading_row(prefix: &str, fields: Vec<String>, stats: &[String]) -> Vec<String> {
    let mut row = vec![prefix.to_string(), fields[0].clone(), fields[8].clone()];
    row.extend_from_slice(stats);
    row.extend_from_slice(&fields[1..8]);
    row
}

fn baseline_fields(e: usize) -> Vec<String> {
    let mut v = vec![String::new(); TUPLE_COLUMNS.len()];
    v[0] = "baseline".into();
    v[1] = e.to_string();
    v
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Other(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Other(anyhow::anyhow!("{e}")))
}

/// Mean and standard error of baseline trials.
fn baseline_stats(b: &BaselineConfig, cfg: &SystemConfig, trials: u64) -> Result<(f64, f64), CliError> {
    let (mut sum, mut sq) = (0.0, 0.0);
    for trial in 0..trials {
        let setup = trial_setup(cfg.seed, trial, cfg.e_max, cfg.eta).truncated(b.e);
        let v = baseline_total_latency(b, cfg, &setup)?.total;
        sum += v;
        sq += v * v;
    }
    let n = trials as f64;
    let mean = sum / n;
    let stderr = if trials > 1 {
        ((sq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

fn check_trials(trials: u64) -> Result<(), CliError> {
    if trials == 0 {
        return Err(config_err("trials must be at least 1"));
    }
    Ok(())
}

fn options(search: &SearchArgs, trials: u64) -> Result<SearchOptions, CliError> {
    check_trials(trials)?;
    Ok(SearchOptions {
        trials,
        screening: parse_screening(search.screen.as_deref())?,
    })
}

const STAT_COLUMNS: [&str; 3] = ["mean", "stderr", "trials"];

pub fn simulate(cfg: &SystemConfig, tuple: &str, trials: u64) -> Result<Vec<u8>, CliError> {
    check_trials(trials)?;
    let (fields, mean, stderr) = match parse_tuple(tuple, cfg)? {
        TupleArg::Private(s) => {
            let r = evaluate_scheme(&s, cfg, trials, &[])?;
            (tuple_fields(&s), r.mean, r.stderr)
        }
        TupleArg::Baseline(b) => {
            let (m, se) = baseline_stats(&b, cfg, trials)?;
            (baseline_fields(b.e), m, se)
        }
    };
    let header: Vec<&str> = TUPLE_COLUMNS.iter().chain(&STAT_COLUMNS).copied().collect();
    let mut row = fields;
    row.extend([mean.to_string(), stderr.to_string(), trials.to_string()]);
    csv_bytes(&header, &[row])
}

fn single_private(search: &SearchArgs) -> Result<(Variant, usize), CliError> {
    match (parse_schemes(&search.scheme)?.as_slice(), parse_z_list(&search.z)?.as_slice()) {
        ([SchemeChoice::Private(v)], [z]) => Ok((*v, *z)),
        _ => Err(config_err("optimize takes one private scheme (1, 2 or 3) and one z")),
    }
}

pub fn optimize(
    cfg: &SystemConfig,
    search_args: &SearchArgs,
    trials: u64,
    deadline: Option<f64>,
    diag: &mut dyn Write,
) -> Result<Vec<u8>, CliError> {
    let (variant, z) = single_private(search_args)?;
    let opts = options(search_args, trials)?;
    let objective = match deadline {
        Some(d) if d.is_finite() => Objective::Exceedance(d),
        Some(_) => return Err(config_err("deadline must be finite")),
        None => Objective::MeanLatency,
    };
    let res = search(&SearchSpace::new(variant, z, cfg), cfg, &opts, objective)?;
    let _ = writeln!(
        diag,
        "best: {} mean={} stderr={} trials={}",
        res.best.scheme, res.best.mean, res.best.stderr, res.best.trials
    );
    let header: Vec<&str> = TUPLE_COLUMNS
        .iter()
        .chain(&STAT_COLUMNS)
        .chain(&["exceedance"])
        .copied()
        .collect();
    let rows: Vec<Vec<String>> = res
        .table
        .iter()
        .map(|r| {
            let mut row = tuple_fields(&r.scheme);
            row.extend([r.mean.to_string(), r.stderr.to_string(), r.trials.to_string()]);
            row.push(r.exceedance.first().map(|p| p.to_string()).unwrap_or_default());
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn best_baseline(cfg: &SystemConfig, trials: u64) -> Result<(usize, f64, f64), CliError> {
    let mut best: Option<(usize, f64, f64)> = None;
    for e in 2..=cfg.e_max {
        let (m, se) = baseline_stats(&BaselineConfig::for_system(cfg, e), cfg, trials)?;
        if best.is_none_or(|b| m < b.1) {
            best = Some((e, m, se));
        }
    }
    best.ok_or_else(|| CliError::Infeasible("baseline needs e_max >= 2".into()))
}

pub fn sweep(cfg: &SystemConfig, search_args: &SearchArgs, gamma_grid: &str, trials: u64) -> Result<Vec<u8>, CliError> {
    let gammas = parse_grid(gamma_grid)?;
    let schemes = parse_schemes(&search_args.scheme)?;
    let zs = parse_z_list(&search_args.z)?;
    let opts = options(search_args, trials)?;
    let mut rows = Vec::new();
    for &gamma in &gammas {
        let c = SystemConfig { gamma, ..cfg.clone() };
        c.validate()?;
        for &choice in &schemes {
            match choice {
                SchemeChoice::Baseline => {
                    let (e, mean, se) = best_baseline(&c, trials)?;
                    let stats = [mean.to_string(), se.to_string(), trials.to_string()];
                    rows.push(leading_row(&gamma.to_string(), baseline_fields(e), &stats));
                }
                SchemeChoice::Private(variant) => {
                    for &z in &zs {
                        let res = search(&SearchSpace::new(variant, z, &c), &c, &opts, Objective::MeanLatency)?;
                        let b = &res.best;
                        let stats = [b.mean.to_string(), b.stderr.to_string(), b.trials.to_string()];
                        rows.push(leading_row(&gamma.to_string(), tuple_fields(&b.scheme), &stats));
                    }
                }
            }
        }
    }
    let header: Vec<&str> = ["gamma", "scheme", "z", "mean_latency", "stderr", "trials"]
        .iter()
        .chain(&DESIGN_COLUMNS)
        .copied()
        .collect();
    csv_bytes(&header, &rows)
}

/// Smallest trial count the deadline command accepts.
pub const MIN_DEADLINE_TRIALS: u64 = 10_000;

pub fn deadline(
    cfg: &SystemConfig,
    search_args: &SearchArgs,
    gamma_grid: &str,
    deadline_grid: &str,
    trials: u64,
    diag: &mut dyn Write,
) -> Result<Vec<u8>, CliError> {
    if trials < MIN_DEADLINE_TRIALS {
        return Err(config_err(format!(
            "deadline estimates need at least {MIN_DEADLINE_TRIALS} trials, got {trials}"
        )));
    }
    if trials < 100_000 {
        let _ = writeln!(diag, "warning: {trials} trials resolve probabilities only down to about {}", 10.0 / trials as f64);
    }
    let gammas = parse_grid(gamma_grid)?;
    let mut deadlines = parse_grid(deadline_grid)?;
    deadlines.sort_by(f64::total_cmp);
    deadlines.dedup();
    let schemes = parse_schemes(&search_args.scheme)?;
    let zs = parse_z_list(&search_args.z)?;
    let opts = options(search_args, trials)?;
    let mut rows = Vec::new();
    for &gamma in &gammas {
        let c = SystemConfig { gamma, ..cfg.clone() };
        c.validate()?;
        for &choice in &schemes {
            let SchemeChoice::Private(variant) = choice else {
                return Err(config_err("deadline profiles cover schemes 1, 2 and 3 only"));
            };
            for &z in &zs {
                let (points, _) = deadline_profile(&SearchSpace::new(variant, z, &c), &c, &deadlines, &opts)?;
                for pt in points {
                    let best: &TupleResult = &pt.best;
                    let stats = [pt.deadline.to_string(), pt.probability.to_string(), best.trials.to_string()];
                    rows.push(leading_row(&gamma.to_string(), tuple_fields(&best.scheme), &stats));
                }
            }
        }
    }
    let header: Vec<&str> = ["gamma", "scheme", "z", "deadline", "exceedance_probability", "trials"]
        .iter()
        .chain(&DESIGN_COLUMNS)
        .copied()
        .collect();
    csv_bytes(&header, &rows)
}

pub fn trace(cfg: &SystemConfig, tuple: &str, trial: u64) -> Result<Vec<u8>, CliError> {
    let TupleArg::Private(scheme) = parse_tuple(tuple, cfg)? else {
        return Err(config_err("trace supports schemes 1, 2 and 3"));
    };
    let setup = trial_setup(cfg.seed, trial, cfg.e_max, cfg.eta);
    let mut lines: Vec<TraceLine> = Vec::new();
    let out = scheme.simulate(cfg, &setup, Some(&mut lines))?;
    let mut text = format!("# {scheme}, trial {trial}\n");
    for (j, l) in setup.lambda().iter().take(scheme.e).enumerate() {
        text.push_str(&format!("# EN {} setup {:.3}\n", j + 1, l / cfg.tau));
    }
    for l in &lines {
        text.push_str(&format!("{l}\n"));
    }
    text.push_str(&format!(
        "# upload {:.3}  compute {:.3}  download {:.3}  decode {:.3}  total {:.3}\n",
        out.upload_end, out.compute_end, out.download_end, out.decode_time, out.total
    ));
    Ok(text.into_bytes())
}
