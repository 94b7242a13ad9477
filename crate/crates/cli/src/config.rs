//! `key=value` configuration files and overrides.

use std::fmt::Write as _;

use edgeshare::latency::SystemConfig;

use crate::CliError;

/// Keys accepted in config files and `--set`, in echo order.
pub const KEYS: &[&str] = &[
    "e_max", "mu", "tau", "eta", "delta", "gamma", "m", "r", "users", "q", "seed",
];

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    let parsed = match v.split_once('/') {
        Some((num, den)) => match (num.trim().parse::<f64>(), den.trim().parse::<f64>()) {
            (Ok(a), Ok(b)) if b != 0.0 => Ok(a / b),
            _ => Err(()),
        },
        None => v.parse::<f64>().map_err(|_| ()),
    };
    parsed.map_err(|()| CliError::Config(format!("{key}: cannot parse {v:?} as a number")))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?} as a nonnegative integer")))
}

/// Sets one key.
pub fn apply(cfg: &mut SystemConfig, key: &str, value: &str) -> Result<(), CliError> {
    let v = value.trim();
    match key.trim() {
        "e_max" => cfg.e_max = parse_int(key, v)?,
        "mu" => cfg.mu = parse_f64(key, v)?,
        "tau" => cfg.tau = parse_f64(key, v)?,
        "eta" => cfg.eta = parse_f64(key, v)?,
        "delta" => cfg.delta = parse_f64(key, v)?,
        "gamma" => cfg.gamma = parse_f64(key, v)?,
        "m" => cfg.m = parse_int(key, v)?,
        "r" => cfg.r = parse_int(key, v)?,
        "users" => cfg.users = if v == "auto" { None } else { Some(parse_int(key, v)?) },
        "q" => cfg.q = parse_int(key, v)?,
        "seed" => cfg.seed = parse_int(key, v)?,
        other => return Err(CliError::Config(format!("unknown key {other:?}"))),
    }
    Ok(())
}

/// Parses a config file body: one `key=value` per line, `#` starts a comment.
pub fn parse_into(cfg: &mut SystemConfig, text: &str) -> Result<(), CliError> {
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {raw:?}", no + 1)))?;
        apply(cfg, k, v).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("line {}: {m}", no + 1)),
            other => other,
        })?;
    }
    Ok(())
}

/// Parses one `--set key=value` override.
pub fn apply_override(cfg: &mut SystemConfig, kv: &str) -> Result<(), CliError> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {kv:?} is not key=value")))?;
    apply(cfg, k, v)
}

/// The resolved configuration as a config file that reproduces it exactly.
pub fn echo(cfg: &SystemConfig) -> String {
    let mut s = String::from("# resolved configuration\n");
    let users = cfg.users.map_or_else(|| "auto".to_string(), |u| u.to_string());
    let values: [String; 11] = [
        cfg.e_max.to_string(),
        cfg.mu.to_string(),
        cfg.tau.to_string(),
        cfg.eta.to_string(),
        cfg.delta.to_string(),
        cfg.gamma.to_string(),
        cfg.m.to_string(),
        cfg.r.to_string(),
        users,
        cfg.q.to_string(),
        cfg.seed.to_string(),
    ];
    for (k, v) in KEYS.iter().zip(values) {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_comments_and_blank_lines() {
        let mut cfg = SystemConfig::default();
        parse_into(&mut cfg, "# storage\nmu = 1/2  # half\n\ngamma=2.5\nusers=4\n").unwrap();
        assert_eq!(cfg.mu, 0.5);
        assert_eq!(cfg.gamma, 2.5);
        assert_eq!(cfg.users, Some(4));
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        let mut cfg = SystemConfig::default();
        assert!(matches!(parse_into(&mut cfg, "colour=red"), Err(CliError::Config(_))));
        assert!(matches!(parse_into(&mut cfg, "gamma"), Err(CliError::Config(_))));
        assert!(matches!(apply_override(&mut cfg, "m=-3"), Err(CliError::Config(_))));
        assert!(matches!(apply_override(&mut cfg, "mu=2/0"), Err(CliError::Config(_))));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = SystemConfig::default();
        apply_override(&mut cfg, "gamma=0.1").unwrap();
        apply_override(&mut cfg, "users=3").unwrap();
        let mut back = SystemConfig { seed: 99, ..SystemConfig::default() };
        parse_into(&mut back, &echo(&cfg)).unwrap();
        assert_eq!(back, cfg);
        let mut dflt = SystemConfig { users: Some(2), ..SystemConfig::default() };
        parse_into(&mut dflt, &echo(&SystemConfig::default())).unwrap();
        assert_eq!(dflt, SystemConfig::default());
    }
}
