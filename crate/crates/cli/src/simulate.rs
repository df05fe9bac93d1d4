use std::fmt::Write as _;
use std::path::Path;

use crucial::numerics::derive_seed;
use crucial::sampler::{mc_expected_errors, ErrorReport, LossPopulation, McOptions, Ordering, ProposalMode};
use crucial::Exec;
use serde::Serialize;

use crate::{parse_enum, write_json, CliError, Outcome, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Family {
    Normal,
    HalfNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub populations: Vec<LossPopulation>,
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub tolerance_se: f64,
    pub seed: u64,
    pub options: McOptions,
}

impl SimSettings {
    pub fn from_config(cfg: &Resolved) -> Result<Self, CliError> {
        let family: Family = parse_enum(cfg, "population")?;
        let mu: f64 = cfg.get("mu")?;
        let sigmas: Vec<f64> = cfg.list("sigmas")?;
        let lambdas: Vec<f64> = cfg.list("lambdas")?;
        if sigmas.is_empty() || lambdas.is_empty() {
            return Err(CliError::Usage("empty sigma or lambda grid".into()));
        }
        let populations = sigmas
            .iter()
            .map(|&sigma| match family {
                Family::Normal => LossPopulation::Normal { mu, sigma },
                Family::HalfNormal => LossPopulation::HalfNormal { mu, sigma },
            })
            .collect();
        let proposal = match cfg.get::<String>("proposal")?.as_str() {
            "auto" => ProposalMode::Auto,
            "population" => ProposalMode::Population,
            other => return Err(CliError::Usage(format!("proposal = {other:?}"))),
        };
        Ok(Self {
            populations,
            lambdas,
            n: cfg.get("n")?,
            tolerance_se: cfg.get("tolerance_se")?,
            seed: cfg.get("seed")?,
            options: McOptions { exec: Exec::Parallel, chunk: cfg.get("chunk")?, proposal },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub sigma: f64,
    pub lambda: f64,
    pub within_tolerance: bool,
    pub report: ErrorReport,
}

/// The serialized name, e.g. `u-beats-p`.
fn ordering_name(o: Ordering) -> String {
    serde_json::to_value(o).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn point_seed(seed: u64, pop: &LossPopulation, lambda: f64) -> u64 {
    let family = match pop {
        LossPopulation::Normal { .. } => "normal",
        LossPopulation::HalfNormal { .. } => "half-normal",
    };
    derive_seed(seed, &format!("simulate/{family}/{}/{}/{lambda}", pop.mu(), pop.sigma()))
}

/// One report per (population, lambda) pair, populations outermost.
pub fn simulate_grid(s: &SimSettings) -> Result<Vec<GridPoint>, CliError> {
    let mut out = Vec::with_capacity(s.populations.len() * s.lambdas.len());
    for pop in &s.populations {
        for &lambda in &s.lambdas {
            let report = mc_expected_errors(pop, lambda, s.n, point_seed(s.seed, pop, lambda), &s.options)?;
            out.push(GridPoint { sigma: pop.sigma(), lambda, within_tolerance: report.within(s.tolerance_se), report });
        }
    }
    Ok(out)
}

pub fn run(cfg: &Resolved, out: &Path) -> Result<Outcome, CliError> {
    let settings = SimSettings::from_config(cfg)?;
    let grid = simulate_grid(&settings)?;
    let mut csv = String::from(
        "sigma,lambda,analytic_u,analytic_p,mc_u,se_u,mc_p,se_p,z_u,z_p,ordering,mc_ordering,orderings_agree,within_tolerance\n",
    );
    let mut summary = String::new();
    for g in &grid {
        let r = &g.report;
        write_json(&out.join(format!("report_sigma{}_lambda{}.json", g.sigma, g.lambda)), r)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.sigma,
            g.lambda,
            r.analytic.e_u,
            r.analytic.e_p,
            r.mc_u.estimate,
            r.mc_u.std_error,
            r.mc_p.estimate,
            r.mc_p.std_error,
            r.z_u,
            r.z_p,
            ordering_name(r.ordering),
            ordering_name(r.mc_ordering),
            r.orderings_agree,
            g.within_tolerance
        );
        let _ = writeln!(
            summary,
            "sigma {:<5} lambda {:<4} E_U {:.6} (mc {:.6}, z {:.2})  E_P {:.6} (mc {:.6}, z {:.2})  {}{}",
            g.sigma,
            g.lambda,
            r.analytic.e_u,
            r.mc_u.estimate,
            r.z_u,
            r.analytic.e_p,
            r.mc_p.estimate,
            r.z_p,
            ordering_name(r.ordering),
            if g.within_tolerance { "" } else { "  OUTSIDE TOLERANCE" }
        );
    }
    std::fs::write(out.join("summary.csv"), csv)?;
    let passed = grid.iter().all(|g| g.within_tolerance);
    let _ = writeln!(
        summary,
        "{} of {} grid points within {} standard errors",
        grid.iter().filter(|g| g.within_tolerance).count(),
        grid.len(),
        settings.tolerance_se
    );
    Ok(Outcome { summary, passed })
}
