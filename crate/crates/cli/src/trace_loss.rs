use std::fmt::Write as _;
use std::path::Path;

use crucial::loss::{crucial_value, kappa_with, KappaRule};

use crate::{parse_enum, CliError, Outcome, Resolved};

pub const FILE: &str = "trace.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Mean of the two current losses.
    Mean,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSettings {
    pub epochs: usize,
    pub easy_start: f64,
    pub hard_start: f64,
    pub easy_decay: f64,
    pub hard_decay: f64,
    pub lambda: f64,
    pub threshold: ThresholdRule,
    pub kappa_rule: KappaRule,
}

impl TraceSettings {
    pub fn from_config(cfg: &Resolved) -> Result<Self, CliError> {
        let threshold = match cfg.get::<String>("threshold")?.as_str() {
            "mean" => ThresholdRule::Mean,
            _ => ThresholdRule::Fixed(cfg.get("threshold")?),
        };
        Ok(Self {
            epochs: cfg.get("epochs")?,
            easy_start: cfg.get("easy_start")?,
            hard_start: cfg.get("hard_start")?,
            easy_decay: cfg.get("easy_decay")?,
            hard_decay: cfg.get("hard_decay")?,
            lambda: cfg.get("lambda")?,
            threshold,
            kappa_rule: parse_enum(cfg, "kappa_rule")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    pub threshold: f64,
    /// `(loss, kappa, value)` for the easy and the hard sample.
    pub easy: (f64, f64, f64),
    pub hard: (f64, f64, f64),
}

/// Losses decay geometrically; each epoch both are modulated against the
/// same threshold.
pub fn trace(s: &TraceSettings) -> Result<Vec<TracePoint>, CliError> {
    if s.lambda.is_nan() || s.lambda <= 0.0 {
        return Err(CliError::Usage(format!("lambda = {} is not > 0", s.lambda)));
    }
    let mut out = Vec::with_capacity(s.epochs);
    for epoch in 0..s.epochs {
        let le = s.easy_start * s.easy_decay.powi(epoch as i32);
        let lh = s.hard_start * s.hard_decay.powi(epoch as i32);
        let eps = match s.threshold {
            ThresholdRule::Mean => (le + lh) / 2.0,
            ThresholdRule::Fixed(v) => v,
        };
        let one = |l: f64| -> Result<(f64, f64, f64), CliError> {
            let k = kappa_with(s.kappa_rule, l, eps, s.lambda)?;
            Ok((l, k, crucial_value(l, eps, k, s.lambda)))
        };
        out.push(TracePoint { epoch, threshold: eps, easy: one(le)?, hard: one(lh)? });
    }
    Ok(out)
}

pub fn run(cfg: &Resolved, out: &Path) -> Result<Outcome, CliError> {
    let points = trace(&TraceSettings::from_config(cfg)?)?;
    let mut csv = String::from("epoch,threshold,easy_loss,easy_kappa,easy_value,hard_loss,hard_kappa,hard_value\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.epoch, p.threshold, p.easy.0, p.easy.1, p.easy.2, p.hard.0, p.hard.1, p.hard.2
        );
    }
    std::fs::write(out.join(FILE), csv)?;
    let summary = match points.first() {
        Some(p) => format!("{} epochs; epoch 0 kappa easy {:.4}, hard {:.4}\n", points.len(), p.easy.1, p.hard.1),
        None => "0 epochs\n".into(),
    };
    Ok(Outcome { summary, passed: true })
}
