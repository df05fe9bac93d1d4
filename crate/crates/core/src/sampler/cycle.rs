use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{loss_stats, LossStats, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleStart {
    /// `|N(1, 0.15^2)|`, skewness near 0.
    NormalLike,
    /// `0.7 + 0.3 |N(0, 1)|`, skewness near 1.
    HalfNormalLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleSchedule {
    Uniform,
    Exponential,
    /// Uniform while skewness <= 0, exponential while it is positive.
    Alternating,
}

/// Toy selection dynamics. Every epoch a selected sample's loss shrinks by
/// `decay`; an unselected one grows by a factor `1 + |N(0, noise_sd^2)|`.
/// Uniform selection picks each sample with probability `select_fraction`;
/// exponential selection uses `min(1, q n w_i / sum w)` with
/// `w_i = exp(-rate (l_i - min l))` and `rate = rate_scale / std_dev`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSimConfig {
    pub n_samples: usize,
    pub epochs: usize,
    pub start: CycleStart,
    pub schedule: CycleSchedule,
    pub decay: f64,
    pub noise_sd: f64,
    pub select_fraction: f64,
    pub rate_scale: f64,
}

impl Default for CycleSimConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            epochs: 100,
            start: CycleStart::NormalLike,
            schedule: CycleSchedule::Alternating,
            decay: 0.9,
            noise_sd: 0.02,
            select_fraction: 0.5,
            rate_scale: 4.0,
        }
    }
}

/// Loss statistics before the first epoch and after each of `cfg.epochs`.
pub fn distribution_cycle_sim(cfg: &CycleSimConfig, rng: &mut SeededRng) -> Result<Vec<LossStats>> {
    if cfg.n_samples < 1000 {
        return Err(Error::invalid("n_samples", "need at least 1000"));
    }
    if !(cfg.decay > 0.0 && cfg.decay < 1.0) {
        return Err(Error::invalid("decay", "must lie in (0, 1)"));
    }
    if !(cfg.select_fraction > 0.0 && cfg.select_fraction <= 1.0) {
        return Err(Error::invalid("select_fraction", "must lie in (0, 1]"));
    }
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::invalid("noise_sd", e.to_string()))?;

    let mut losses: Vec<f64> = (0..cfg.n_samples)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            match cfg.start {
                CycleStart::NormalLike => (1.0 + 0.15 * z).abs(),
                CycleStart::HalfNormalLike => 0.7 + 0.3 * z.abs(),
            }
        })
        .collect();

    let mut out = Vec::with_capacity(cfg.epochs + 1);
    let mut stats = loss_stats(&losses)?;
    out.push(stats);
    let n = cfg.n_samples as f64;
    let q = cfg.select_fraction;
    let mut probs = vec![q; cfg.n_samples];
    for _ in 0..cfg.epochs {
        let exponential = match cfg.schedule {
            CycleSchedule::Uniform => false,
            CycleSchedule::Exponential => true,
            CycleSchedule::Alternating => stats.skewness > 0.0,
        };
        if exponential && stats.std_dev > 0.0 {
            let rate = cfg.rate_scale / stats.std_dev;
            let floor = losses.iter().copied().fold(f64::INFINITY, f64::min);
            for (p, &l) in probs.iter_mut().zip(&losses) {
                *p = (-rate * (l - floor)).exp();
            }
            let total: f64 = probs.iter().sum();
            for p in probs.iter_mut() {
                *p = (q * n * *p / total).min(1.0);
            }
        } else {
            probs.fill(q);
        }
        for (l, &p) in losses.iter_mut().zip(&probs) {
            if rng.random::<f64>() < p {
                *l *= cfg.decay;
            } else {
                *l *= 1.0 + noise.sample(rng).abs();
            }
        }
        stats = loss_stats(&losses)?;
        out.push(stats);
    }
    Ok(out)
}

/// Number of strict sign flips in `xs`, skipping exact zeros.
pub fn sign_changes(xs: &[f64]) -> usize {
    let mut prev = 0.0f64;
    let mut count = 0;
    for &x in xs {
        if x == 0.0 {
            continue;
        }
        if prev != 0.0 && (x > 0.0) != (prev > 0.0) {
            count += 1;
        }
        prev = x;
    }
    count
}
