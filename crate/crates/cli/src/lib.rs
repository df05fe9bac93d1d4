//! Command implementations behind the `crucial` binary.
//!
//! Each command reads a [`config::Resolved`] configuration, writes its files
//! into `output_dir` (starting with the echoed configuration) and returns an
//! [`Outcome`]. Exit codes: 0 success, 1 failed check or divergence, 2 usage
//! or configuration error.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod config;
pub mod gen_data;
pub mod properties;
pub mod simulate;
pub mod trace_loss;
pub mod train;

pub use config::Resolved;

pub const CONFIG_ECHO: &str = "config.resolved";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
    Lib(crucial::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) => 1,
            CliError::Lib(crucial::Error::Diverged { .. }) => 1,
            CliError::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crucial::Error> for CliError {
    fn from(e: crucial::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

/// Text for stdout and whether every check the command ran passed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Runs the configured command inside a pool of `workers` threads.
pub fn run(cfg: &Resolved) -> Result<Outcome, CliError> {
    let out = cfg.output_dir()?;
    let workers: usize = cfg.get("workers")?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join(CONFIG_ECHO), cfg.echo())?;
    with_workers(workers, || match cfg.command() {
        "simulate" => simulate::run(cfg, &out),
        "train" => train::run(cfg, &out),
        "properties" => properties::run(cfg, &out),
        "trace-loss" => trace_loss::run(cfg, &out),
        "gen-data" => gen_data::run(cfg, &out),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    })?
}

#[cfg(feature = "parallel")]
fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    Ok(f())
}

/// Parses a kebab-case enum value such as `main-text`.
pub(crate) fn parse_enum<T: DeserializeOwned>(cfg: &Resolved, key: &str) -> Result<T, CliError> {
    let raw: String = cfg.get(key)?;
    serde_json::from_value(serde_json::Value::String(raw.clone()))
        .map_err(|_| CliError::Usage(format!("{key} = {raw:?} is not a recognised value")))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(crucial::Error::from)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub(crate) fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
