use std::fmt::Write as _;
use std::path::Path;

use crucial::loss::KappaRule;
use crucial::suites::{run_all, run_one, suite_names, SuiteOptions, SuiteResult};
use crucial::Exec;
use serde::Serialize;

use crate::{parse_enum, write_json, CliError, Outcome, Resolved};

pub const FILE: &str = "properties.json";

#[derive(Debug, Serialize)]
pub struct PropertiesReport {
    pub seed: u64,
    pub kappa_rule: KappaRule,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

pub fn report(cfg: &Resolved) -> Result<PropertiesReport, CliError> {
    let opts =
        SuiteOptions { seed: cfg.get("seed")?, kappa_rule: parse_enum(cfg, "kappa_rule")?, exec: Exec::Parallel };
    let wanted: Vec<String> = cfg.list("suites")?;
    let suites = if wanted.is_empty() || wanted.iter().any(|w| w == "all") {
        run_all(&opts)
    } else {
        wanted
            .iter()
            .map(|w| {
                run_one(w, &opts)
                    .ok_or_else(|| CliError::Usage(format!("unknown suite {w:?}; known: {}", suite_names().join(", "))))
            })
            .collect::<Result<_, _>>()?
    };
    Ok(PropertiesReport {
        seed: opts.seed,
        kappa_rule: opts.kappa_rule,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

pub fn run(cfg: &Resolved, out: &Path) -> Result<Outcome, CliError> {
    let rep = report(cfg)?;
    write_json(&out.join(FILE), &rep)?;
    let mut summary = String::new();
    for s in &rep.suites {
        let _ = writeln!(
            summary,
            "{} {:<24} {:>6} checks, {} failures, max error {:.3e}{}",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.checked,
            s.failures,
            s.max_error,
            if s.detail.is_empty() || s.passed { String::new() } else { format!("  ({})", s.detail) }
        );
    }
    Ok(Outcome { summary, passed: rep.passed })
}
