//! Flat `key = value` configuration with per-command key registries.
//!
//! Values resolve as flags > file > defaults. Keys are snake_case in files
//! and kebab-case on the command line; either spelling is accepted in files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default: Some(default), help }
}

const fn optional(name: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default: None, help }
}

const COMMON: &[KeySpec] = &[
    key("seed", "0", "master seed; every component seed is derived from it"),
    optional("output_dir", "directory for all output files (required)"),
    key("workers", "0", "worker threads; 0 uses all cores"),
];

const SIMULATE: &[KeySpec] = &[
    key("population", "normal", "loss population: normal | half-normal"),
    key("mu", "0", "population location"),
    key("sigmas", "0.1,0.5,1,2", "comma-separated population scales"),
    key("lambdas", "0.5,1,2", "comma-separated exponential selection rates"),
    key("n", "1000000", "Monte-Carlo draws per estimate"),
    key("tolerance_se", "3", "allowed |mc - analytic| in standard errors"),
    key("proposal", "auto", "importance proposal: auto | population"),
    key("chunk", "32768", "draws per work chunk"),
];

const TRAIN: &[KeySpec] = &[
    key("task", "regression", "regression | single-shot | continuous"),
    optional("data_csv", "CSV file to train on instead of generated data"),
    key("n", "512", "generated samples"),
    key("length", "64", "generated series length"),
    key("noise_sd", "", "generator noise sd (empty: generator default)"),
    key("freq_min", "0.02", "sine generator: lowest frequency, cycles per step"),
    key("freq_max", "0.1", "sine generator: highest frequency, cycles per step"),
    key("drift_rate", "0.05", "drift generator: class-mean drift per step"),
    key("label_noise", "0", "drift generator: fraction of flipped labels"),
    key("phi", "0.5", "drift generator: AR(1) coefficient"),
    key("separation", "1", "drift generator: class-mean separation"),
    key("train_fraction", "0.75", "leading fraction of samples used for training"),
    key("model", "linear", "linear | mlp | elman"),
    key("hidden", "16", "hidden sizes (comma-separated for mlp)"),
    key("window", "16", "input window in time steps"),
    key("epochs", "100", "epochs (per stage for continuous)"),
    key("lr", "0.05", "learning rate"),
    key("batch_size", "32", "mini-batch size"),
    key("wrapper", "none", "loss wrapper: none | adp | sin | baseline"),
    key("lambda", "0.01", "confidence regularization"),
    key("omega", "0.7853981633974483", "sine schedule angular frequency, rad/epoch"),
    key("phase", "0", "sine schedule phase, rad"),
    key("mu", "mean", "sine base threshold: mean | <value>"),
    key("threshold", "0", "baseline wrapper threshold"),
    key("kappa_rule", "argmin", "argmin | main-text | unit"),
    key("sin_threshold", "mirrored", "mirrored | as-written"),
    key("stages", "4", "continuous task: number of prefix cuts"),
    key("cuts", "", "continuous task: explicit comma-separated cuts"),
    key("accumulate_stats", "false", "continuous task: keep wrapper statistics across stages"),
    optional("baseline_seed", "seed of the untrained reference model (default: derived)"),
    key("seeds", "1", "number of consecutive seeds to run"),
    key("trace", "true", "write the per-sample loss trace"),
];

const PROPERTIES: &[KeySpec] = &[
    key("kappa_rule", "argmin", "confidence rule under test: argmin | main-text | unit"),
    key("suites", "all", "comma-separated suite names, or all"),
];

const TRACE_LOSS: &[KeySpec] = &[
    key("epochs", "30", "epochs to trace"),
    key("easy_start", "0.2", "initial loss of the easy sample"),
    key("hard_start", "2", "initial loss of the hard sample"),
    key("easy_decay", "0.8", "per-epoch loss factor of the easy sample"),
    key("hard_decay", "0.95", "per-epoch loss factor of the hard sample"),
    key("lambda", "0.01", "confidence regularization"),
    key("threshold", "mean", "mean (of the two current losses) | <value>"),
    key("kappa_rule", "argmin", "argmin | main-text | unit"),
];

const GEN_DATA: &[KeySpec] = &[
    key("kind", "sine", "sine | drift"),
    key("n", "512", "samples"),
    key("length", "64", "series length"),
    key("noise_sd", "", "noise sd (empty: generator default)"),
    key("freq_min", "0.02", "sine: lowest frequency, cycles per step"),
    key("freq_max", "0.1", "sine: highest frequency, cycles per step"),
    key("drift_rate", "0.05", "drift: class-mean drift per step"),
    key("label_noise", "0", "drift: fraction of flipped labels"),
    key("phi", "0.5", "drift: AR(1) coefficient"),
    key("separation", "1", "drift: class-mean separation"),
    key("file", "data.csv", "output file name inside output_dir"),
];

pub const COMMANDS: &[(&str, &str)] = &[
    ("simulate", "compare analytic and simulated selection errors over a grid"),
    ("train", "train a model with or without the loss wrapper"),
    ("properties", "run every invariant suite"),
    ("trace-loss", "trace confidence and loss for an easy and a hard sample"),
    ("gen-data", "write a synthetic dataset as CSV"),
];

/// Every key `command` accepts, common keys first.
pub fn keys(command: &str) -> Vec<KeySpec> {
    let own: &[KeySpec] = match command {
        "simulate" => SIMULATE,
        "train" => TRAIN,
        "properties" => PROPERTIES,
        "trace-loss" => TRACE_LOSS,
        "gen-data" => GEN_DATA,
        _ => &[],
    };
    COMMON.iter().chain(own).copied().collect()
}

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    command: String,
    values: BTreeMap<String, String>,
}

impl Resolved {
    /// Defaults, then `file`, then `flags`.
    pub fn resolve(command: &str, file: Option<&Path>, flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut r = Self::defaults(command)?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_file(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))? {
                r.set(&k, v)?;
            }
        }
        for (k, v) in flags {
            r.set(k, v.clone())?;
        }
        Ok(r)
    }

    /// Defaults overridden by `pairs`, for programmatic use.
    pub fn from_pairs(command: &str, pairs: &[(&str, &str)]) -> Result<Self, CliError> {
        let mut r = Self::defaults(command)?;
        for (k, v) in pairs {
            r.set(k, v.to_string())?;
        }
        Ok(r)
    }

    fn defaults(command: &str) -> Result<Self, CliError> {
        if !COMMANDS.iter().any(|(c, _)| *c == command) {
            return Err(CliError::Usage(format!("unknown command {command:?}")));
        }
        let values =
            keys(command).into_iter().filter_map(|k| k.default.map(|d| (k.name.to_string(), d.to_string()))).collect();
        Ok(Self { command: command.to_string(), values })
    }

    pub fn set(&mut self, key: &str, value: String) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        if !keys(&self.command).iter().any(|k| k.name == key) {
            return Err(CliError::Usage(format!("unknown key {key:?} for {}", self.command)));
        }
        self.values.insert(key, value);
        Ok(())
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key).ok_or_else(|| CliError::Usage(format!("missing value for {key}")))?;
        raw.parse().map_err(|e| CliError::Usage(format!("{key} = {raw:?}: {e}")))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let Some(raw) = self.raw(key) else { return Ok(Vec::new()) };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::Usage(format!("{key}: {s:?}: {e}"))))
            .collect()
    }

    pub fn output_dir(&self) -> Result<PathBuf, CliError> {
        self.raw("output_dir")
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Usage(format!("{} needs --output-dir", self.command)))
    }

    /// The resolved configuration as a config file, keys sorted.
    pub fn echo(&self) -> String {
        let mut s = format!("# {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped; a
/// `#` preceded by whitespace starts a trailing comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = match line.find(" #").or_else(|| line.find("\t#")) {
            Some(p) => &line[..p],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
