//! Expected selection error under uniform (U) and loss-exponential (P)
//! sample selection, analytically and by Monte Carlo, plus a toy simulation
//! of how selection reshapes a loss distribution over epochs.

mod analytic;
mod cycle;
mod mc;

pub use analytic::{analytic_expected_errors, ordering_check, AnalyticErrors, Ordering};
pub use cycle::{distribution_cycle_sim, sign_changes, CycleSchedule, CycleSimConfig, CycleStart};
pub use mc::{mc_expected_error, mc_expected_errors, ErrorReport, McEstimate, McOptions, Proposal, ProposalMode};

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossPopulation {
    /// `l ~ N(mu, sigma^2)`.
    Normal { mu: f64, sigma: f64 },
    /// Folded form `l = mu + sigma |Z|`, mean `mu + sigma sqrt(2/pi)`,
    /// variance `sigma^2 (1 - 2/pi)`.
    HalfNormal { mu: f64, sigma: f64 },
}

impl LossPopulation {
    pub fn mu(&self) -> f64 {
        match *self {
            Self::Normal { mu, .. } | Self::HalfNormal { mu, .. } => mu,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Self::Normal { sigma, .. } | Self::HalfNormal { sigma, .. } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu().is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        let s = self.sigma();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("sigma", format!("{s} is not > 0")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Normal { mu, .. } => mu,
            Self::HalfNormal { mu, sigma } => mu + sigma * FRAC_2_PI.sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Normal { sigma, .. } => sigma * sigma,
            Self::HalfNormal { sigma, .. } => sigma * sigma * (1.0 - FRAC_2_PI),
        }
    }

    /// Maps a standard normal draw to a draw from this population.
    pub fn from_standard(&self, z: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => mu + sigma * z,
            Self::HalfNormal { mu, sigma } => mu + sigma * z.abs(),
        }
    }

    /// Log density up to an additive constant shared by all `l`.
    pub(crate) fn log_density(&self, l: f64) -> f64 {
        match *self {
            Self::Normal { mu, sigma } => {
                let z = (l - mu) / sigma;
                -0.5 * z * z
            }
            Self::HalfNormal { mu, sigma } => {
                if l < mu {
                    f64::NEG_INFINITY
                } else {
                    let z = (l - mu) / sigma;
                    -0.5 * z * z + 2f64.ln()
                }
            }
        }
    }

    /// `sigma < pi / rate`, the hypothesis under which the half-normal bound
    /// is stated.
    pub fn within_bound(&self, rate: f64) -> bool {
        self.sigma() < PI / rate
    }
}

/// How samples are picked for an SGD step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SelectionCondition {
    /// Condition U: every sample equally likely.
    Uniform,
    /// Condition P: probability proportional to `rate * exp(-rate * l)`.
    Exponential { rate: f64 },
}

impl SelectionCondition {
    pub fn validate(&self) -> Result<()> {
        if let Self::Exponential { rate } = *self {
            check_rate(rate)?;
        }
        Ok(())
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("rate", format!("{rate} is not > 0")))
    }
}
