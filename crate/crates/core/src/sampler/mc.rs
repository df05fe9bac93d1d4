use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{analytic_expected_errors, AnalyticErrors, LossPopulation, Ordering, SelectionCondition};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::SeededRng;

const PILOT_DRAWS: usize = 20_000;
const PILOT_ROUNDS: usize = 12;
const ESS_ACCEPT: f64 = 0.05;
const ESS_TARGET: f64 = 0.3;

/// Distribution the draws come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Proposal {
    /// Draw from the loss population itself and weight by `exp(-rate l)`.
    Population,
    /// Draw from `N(mean, sd^2)` and weight by the full density ratio.
    Normal { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalMode {
    /// Always sample the population.
    Population,
    /// Sample the population unless its effective sample size collapses, in
    /// which case a normal proposal is fitted to the tilted target by a few
    /// pilot rounds.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub exec: Exec,
    /// Draws per work chunk; chunk `k` always uses substream `k`.
    pub chunk: usize,
    pub proposal: ProposalMode,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { exec: Exec::Parallel, chunk: 1 << 15, proposal: ProposalMode::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub ess: f64,
    pub proposal: Proposal,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    w: f64,
    wf: f64,
    w2: f64,
    w2f: f64,
    w2f2: f64,
}

impl Sums {
    fn push(&mut self, w: f64, f: f64) {
        let w2 = w * w;
        self.w += w;
        self.wf += w * f;
        self.w2 += w2;
        self.w2f += w2 * f;
        self.w2f2 += w2 * f * f;
    }

    fn merge(mut self, o: &Sums) -> Sums {
        self.w += o.w;
        self.wf += o.wf;
        self.w2 += o.w2;
        self.w2f += o.w2f;
        self.w2f2 += o.w2f2;
        self
    }
}

/// Log importance weight of `l` for the given condition and proposal,
/// before the common shift.
fn log_weight(pop: &LossPopulation, cond: SelectionCondition, proposal: Proposal, l: f64) -> f64 {
    let tilt = match cond {
        SelectionCondition::Uniform => 0.0,
        SelectionCondition::Exponential { rate } => -rate * (l - pop.mu()),
    };
    match proposal {
        Proposal::Population => tilt,
        Proposal::Normal { mean, sd } => {
            let z = (l - mean) / sd;
            pop.log_density(l) + tilt + 0.5 * z * z + sd.ln() - pop.sigma().ln()
        }
    }
}

fn draw(pop: &LossPopulation, proposal: Proposal, rng: &mut SeededRng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    match proposal {
        Proposal::Population => pop.from_standard(z),
        Proposal::Normal { mean, sd } => mean + sd * z,
    }
}

/// Weighted mean, variance, ESS fraction and max log weight of a pilot.
fn pilot(
    pop: &LossPopulation,
    cond: SelectionCondition,
    proposal: Proposal,
    rng: &mut SeededRng,
) -> (f64, f64, f64, f64) {
    let draws: Vec<f64> = (0..PILOT_DRAWS).map(|_| draw(pop, proposal, rng)).collect();
    let lw: Vec<f64> = draws.iter().map(|&l| log_weight(pop, cond, proposal, l)).collect();
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|&x| (x - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let mean = w.iter().zip(&draws).map(|(w, l)| w * l).sum::<f64>() / sw;
    let var = w.iter().zip(&draws).map(|(w, l)| w * (l - mean) * (l - mean)).sum::<f64>() / sw;
    (mean, var, sw * sw / sw2 / PILOT_DRAWS as f64, top)
}

/// Picks the proposal and the log-weight shift for the main run.
fn choose_proposal(
    pop: &LossPopulation,
    cond: SelectionCondition,
    mode: ProposalMode,
    rng: &SeededRng,
) -> (Proposal, f64) {
    let tilted = matches!(cond, SelectionCondition::Exponential { .. });
    if !tilted || mode == ProposalMode::Population {
        return (Proposal::Population, 0.0);
    }
    let mut proposal = Proposal::Population;
    let (mut mean, mut var, ess, _) = pilot(pop, cond, proposal, &mut rng.derive("pilot-0"));
    if ess >= ESS_ACCEPT {
        return (Proposal::Population, 0.0);
    }
    let mut frac = ess;
    let mut top = 0.0;
    for round in 1..=PILOT_ROUNDS {
        let widen = if frac < ESS_ACCEPT { (4.0 * var).max(pop.variance()) } else { 1.5 * var };
        proposal = Proposal::Normal { mean, sd: widen.sqrt() };
        let (m, v, f, t) = pilot(pop, cond, proposal, &mut rng.derive(&format!("pilot-{round}")));
        top = t;
        frac = f;
        if frac >= ESS_TARGET {
            break;
        }
        mean = m;
        var = v;
    }
    (proposal, top)
}

/// Self-normalized importance-sampling estimate of `E[(l - mean_pop)^2]`
/// under `cond`, with a delta-method standard error.
///
/// Draws are split into fixed chunks, chunk `k` using `rng.substream(k)`,
/// and reduced in chunk order, so the result depends only on the seed and
/// `opts.chunk`, never on the thread count.
pub fn mc_expected_error(
    pop: &LossPopulation,
    cond: SelectionCondition,
    n: usize,
    rng: &SeededRng,
    opts: &McOptions,
) -> Result<McEstimate> {
    pop.validate()?;
    cond.validate()?;
    if n < 2 {
        return Err(Error::invalid("n", "need at least two draws"));
    }
    let (proposal, shift) = choose_proposal(pop, cond, opts.proposal, rng);
    let target = pop.mean();
    let parts = opts.exec.map_ranges(n, opts.chunk, |k, range| {
        let mut r = rng.substream(k as u64);
        let mut s = Sums::default();
        for _ in range {
            let l = draw(pop, proposal, &mut r);
            let w = (log_weight(pop, cond, proposal, l) - shift).exp();
            let d = l - target;
            s.push(w, d * d);
        }
        s
    });
    let s = parts.iter().fold(Sums::default(), |acc, p| acc.merge(p));
    if !(s.w > 0.0 && s.w.is_finite()) {
        return Err(Error::invalid("proposal", "importance weights vanished or overflowed"));
    }
    let est = s.wf / s.w;
    let var = (s.w2f2 - 2.0 * est * s.w2f + est * est * s.w2) / (s.w * s.w);
    Ok(McEstimate { estimate: est, std_error: var.max(0.0).sqrt(), ess: s.w * s.w / s.w2, proposal })
}

/// Analytic and Monte-Carlo errors for one population and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub population: LossPopulation,
    pub lambda: f64,
    pub analytic: AnalyticErrors,
    pub mc_u: McEstimate,
    pub mc_p: McEstimate,
    /// Ordering implied by the closed forms.
    pub ordering: Ordering,
    /// Ordering the simulation supports at 3 standard errors.
    pub mc_ordering: Ordering,
    /// Whether the closed forms and the simulation pick the same winner.
    pub orderings_agree: bool,
    /// `|mc - analytic| / stderr` for U and P.
    pub z_u: f64,
    pub z_p: f64,
    pub n: usize,
    pub seed: u64,
}

impl ErrorReport {
    /// Both simulated errors lie within `k` standard errors of the closed forms.
    pub fn within(&self, k: f64) -> bool {
        self.z_u <= k && self.z_p <= k
    }
}

fn z_score(mc: &McEstimate, analytic: f64) -> f64 {
    let d = (mc.estimate - analytic).abs();
    if d == 0.0 {
        0.0
    } else {
        d / mc.std_error
    }
}

/// Runs U and P from independent named sub-streams of `seed`.
pub fn mc_expected_errors(
    pop: &LossPopulation,
    rate: f64,
    n: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<ErrorReport> {
    let analytic = analytic_expected_errors(pop, rate)?;
    let root = SeededRng::new(seed);
    let mc_u = mc_expected_error(pop, SelectionCondition::Uniform, n, &root.derive("uniform"), opts)?;
    let mc_p = mc_expected_error(pop, SelectionCondition::Exponential { rate }, n, &root.derive("exponential"), opts)?;
    let ordering = Ordering::compare(analytic.e_u, analytic.e_p, 1e-12 * analytic.e_u.abs().max(analytic.e_p.abs()));
    let mc_ordering = Ordering::compare(mc_u.estimate, mc_p.estimate, 3.0 * mc_u.std_error.hypot(mc_p.std_error));
    Ok(ErrorReport {
        population: *pop,
        lambda: rate,
        analytic,
        z_u: z_score(&mc_u, analytic.e_u),
        z_p: z_score(&mc_p, analytic.e_p),
        mc_u,
        mc_p,
        ordering,
        mc_ordering,
        orderings_agree: ordering == mc_ordering,
        n,
        seed,
    })
}
