//! Experiment runner behind the `edgeshare` binary.
//!
//! Every command writes one CSV (or text, for `trace`) to the output and the
//! resolved configuration to the diagnostic stream.

use std::io::Write;

use clap::{Args, Parser, Subcommand};
use edgeshare::latency::SystemConfig;

pub mod commands;
pub mod config;

/// Failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file or parameter values (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// The search space has no feasible scheme (exit 3).
    #[error("infeasible search space: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<edgeshare::Error> for CliError {
    fn from(e: edgeshare::Error) -> Self {
        use edgeshare::Error as E;
        match e {
            E::EmptySpace => CliError::Infeasible(e.to_string()),
            E::InvalidParams(_)
            | E::InfeasibleT { .. }
            | E::InfeasibleConfig(_)
            | E::InvalidModulus(_)
            | E::InfeasibleFill { .. } => CliError::Config(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "edgeshare", version, about = "Latency experiments for private coded edge computing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Config file with key=value lines.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Seed of the setup-time draws (same as --set seed=N).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per candidate.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SearchArgs {
    /// Schemes: comma list of 1, 2, 3 (and `baseline` where supported).
    #[arg(long, default_value = "1")]
    pub scheme: String,
    /// Privacy levels, comma list.
    #[arg(long, default_value = "1")]
    pub z: String,
    /// Screening stages `trials:keep,...` run before the final trials.
    #[arg(long)]
    pub screen: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo statistics of one scheme.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scheme, e.g. `scheme=2,e=9,p=6,n=8` or `scheme=baseline,e=9`.
        #[arg(long)]
        tuple: String,
    },
    /// Grid search for one scheme and privacy level; writes every candidate.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// Minimize the probability of exceeding this deadline instead of the mean.
        #[arg(long)]
        deadline: Option<f64>,
    },
    /// Optimized mean latency over a grid of gamma values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// `a,b,c` or `start:stop:step`.
        #[arg(long, default_value = "0:5:0.5")]
        gamma_grid: String,
    },
    /// Smallest probability of missing each deadline.
    Deadline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value = "1")]
        gamma_grid: String,
        #[arg(long, default_value = "2000:20000:2000")]
        deadline_grid: String,
    },
    /// Event log of one trial.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tuple: String,
        /// Trial index whose setup draw is used.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Optimize { common, .. }
            | Command::Sweep { common, .. }
            | Command::Deadline { common, .. }
            | Command::Trace { common, .. } => common,
        }
    }
}

/// Resolves defaults, the config file, `--set` overrides and `--seed`.
pub fn resolve_config(common: &Common) -> Result<SystemConfig, CliError> {
    let mut cfg = SystemConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        config::parse_into(&mut cfg, &text)?;
    }
    for kv in &common.set {
        config::apply_override(&mut cfg, kv)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command. Returns the output bytes; the resolved
/// configuration and notes go to `diag`.
pub fn execute(cli: &Cli, diag: &mut dyn Write) -> Result<Vec<u8>, CliError> {
    let common = cli.command.common();
    let cfg = resolve_config(common)?;
    let _ = write!(diag, "{}", config::echo(&cfg));
    let trials = common.trials;
    match &cli.command {
        Command::Simulate { tuple, .. } => commands::simulate(&cfg, tuple, trials.unwrap_or(10_000)),
        Command::Optimize { search, deadline, .. } => {
            commands::optimize(&cfg, search, trials.unwrap_or(10_000), *deadline, diag)
        }
        Command::Sweep { search, gamma_grid, .. } => {
            commands::sweep(&cfg, search, gamma_grid, trials.unwrap_or(10_000))
        }
        Command::Deadline {
            search,
            gamma_grid,
            deadline_grid,
            ..
        } => commands::deadline(&cfg, search, gamma_grid, deadline_grid, trials.unwrap_or(100_000), diag),
        Command::Trace { tuple, trial, .. } => commands::trace(&cfg, tuple, *trial),
    }
}

/// Parses `args` (without the program name), runs, and writes the output
/// to `--out` or `stdout`. Returns the exit code.
pub fn run_with<I, S>(args: I, stdout: &mut dyn Write, diag: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("edgeshare")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(diag, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => 2,
            };
        }
    };
    let result = execute(&cli, diag).and_then(|bytes| {
        match &cli.command.common().out {
            Some(path) => std::fs::write(path, &bytes)
                .map_err(|e| CliError::Other(anyhow::anyhow!("cannot write {}: {e}", path.display()))),
            None => stdout
                .write_all(&bytes)
                .map_err(|e| CliError::Other(anyhow::anyhow!("cannot write output: {e}"))),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            e.exit_code()
        }
    }
}
