use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Label, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Noisy sinusoids; the target is the next value `x_{T+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineConfig {
    pub n: usize,
    pub length: usize,
    pub noise_sd: f64,
    /// Frequency range in cycles per step.
    pub freq_min: f64,
    pub freq_max: f64,
}

impl Default for SineConfig {
    fn default() -> Self {
        Self { n: 512, length: 64, noise_sd: 0.1, freq_min: 0.02, freq_max: 0.1 }
    }
}

pub fn gen_sine_regression(cfg: &SineConfig, rng: &mut SeededRng) -> Result<Dataset> {
    if cfg.n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd", "must be finite and >= 0"));
    }
    if !(cfg.freq_min > 0.0 && cfg.freq_min <= cfg.freq_max && cfg.freq_max <= 0.5) {
        return Err(Error::invalid("freq", "need 0 < freq_min <= freq_max <= 0.5"));
    }
    let samples = (0..cfg.n)
        .map(|i| {
            let f = cfg.freq_min + (cfg.freq_max - cfg.freq_min) * rng.random::<f64>();
            let phase = TAU * rng.random::<f64>();
            let mut next = |t: usize| {
                let z: f64 = rng.sample(StandardNormal);
                (TAU * f * t as f64 + phase).sin() + cfg.noise_sd * z
            };
            let values: Vec<f64> = (0..cfg.length).map(&mut next).collect();
            let target = next(cfg.length);
            TimeSeriesSample { id: i as u64, values, label: Some(Label::Real(target)) }
        })
        .collect();
    Dataset::new(cfg.length, 1, samples)
}

/// Two AR(1) classes whose means move over time.
///
/// `x_t = phi x_{t-1} + (1 - phi) m_c(t) + noise_sd e_t` with
/// `m_c(t) = +-(separation / 2) cos(drift_rate t)`, `+` for class 1. The
/// sign of the class-separating mean therefore flips every `pi / drift_rate`
/// steps, so a rule learned on an early prefix need not hold on a later one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub n: usize,
    pub length: usize,
    pub drift_rate: f64,
    /// Fraction of labels flipped, in `[0, 0.5)`.
    pub label_noise: f64,
    pub phi: f64,
    pub separation: f64,
    pub noise_sd: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { n: 512, length: 64, drift_rate: 0.05, label_noise: 0.0, phi: 0.5, separation: 1.0, noise_sd: 0.5 }
    }
}

impl DriftConfig {
    /// Class-1 mean at time step `t` (0-based); class 0 is its negative.
    pub fn class_mean(&self, t: usize) -> f64 {
        0.5 * self.separation * (self.drift_rate * t as f64).cos()
    }
}

pub fn gen_drift_classification(cfg: &DriftConfig, rng: &mut SeededRng) -> Result<Dataset> {
    if cfg.n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    if !(cfg.drift_rate >= 0.0 && cfg.drift_rate.is_finite()) {
        return Err(Error::invalid("drift_rate", "must be finite and >= 0"));
    }
    if !(0.0..0.5).contains(&cfg.label_noise) {
        return Err(Error::invalid("label_noise", "must lie in [0, 0.5)"));
    }
    if cfg.phi.is_nan() || cfg.phi.abs() >= 1.0 {
        return Err(Error::invalid("phi", "need |phi| < 1"));
    }
    let mut flipped = Vec::new();
    let samples = (0..cfg.n)
        .map(|i| {
            let class = rng.random_range(0..2usize);
            let sign = if class == 1 { 1.0 } else { -1.0 };
            let mut x = sign * cfg.class_mean(0);
            let values: Vec<f64> = (0..cfg.length)
                .map(|t| {
                    let z: f64 = rng.sample(StandardNormal);
                    x = cfg.phi * x + (1.0 - cfg.phi) * sign * cfg.class_mean(t) + cfg.noise_sd * z;
                    x
                })
                .collect();
            let label = if rng.random::<f64>() < cfg.label_noise {
                flipped.push(i as u64);
                1 - class
            } else {
                class
            };
            TimeSeriesSample { id: i as u64, values, label: Some(Label::Class(label)) }
        })
        .collect();
    let mut data = Dataset::new(cfg.length, 1, samples)?;
    data.flipped = flipped;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_target_extrapolates() {
        let cfg = SineConfig { n: 20, noise_sd: 0.0, ..SineConfig::default() };
        let d = gen_sine_regression(&cfg, &mut SeededRng::new(1)).unwrap();
        for s in d.samples() {
            // Any pure sinusoid satisfies x_{t+1} = 2 cos(w) x_t - x_{t-1}; recover cos(w) from the series.
            let v = &s.values;
            let c = (v[2] + v[0]) / (2.0 * v[1]);
            let n = v.len();
            let want = 2.0 * c * v[n - 1] - v[n - 2];
            assert!((s.label.unwrap().real().unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = gen_sine_regression(&SineConfig::default(), &mut SeededRng::new(5)).unwrap();
        let b = gen_sine_regression(&SineConfig::default(), &mut SeededRng::new(5)).unwrap();
        assert_eq!(a, b);
        let c = gen_drift_classification(&DriftConfig::default(), &mut SeededRng::new(5)).unwrap();
        let d = gen_drift_classification(&DriftConfig::default(), &mut SeededRng::new(5)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn spectral_peak_at_configured_frequency() {
        let f0 = 0.125;
        let cfg = SineConfig { n: 5, length: 64, noise_sd: 0.05, freq_min: f0, freq_max: f0 };
        let d = gen_sine_regression(&cfg, &mut SeededRng::new(2)).unwrap();
        for s in d.samples() {
            let t_len = s.values.len();
            let power = |k: usize| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, x) in s.values.iter().enumerate() {
                    let a = TAU * k as f64 * t as f64 / t_len as f64;
                    re += x * a.cos();
                    im -= x * a.sin();
                }
                re * re + im * im
            };
            let peak = (1..t_len / 2).max_by(|&a, &b| power(a).total_cmp(&power(b))).unwrap();
            assert_eq!(peak, (f0 * t_len as f64).round() as usize);
        }
    }

    #[test]
    fn no_label_noise_no_flips() {
        let d = gen_drift_classification(&DriftConfig::default(), &mut SeededRng::new(3)).unwrap();
        assert!(d.flipped.is_empty());
        let noisy = DriftConfig { label_noise: 0.2, n: 2000, ..DriftConfig::default() };
        let d = gen_drift_classification(&noisy, &mut SeededRng::new(3)).unwrap();
        let frac = d.flipped.len() as f64 / 2000.0;
        assert!((frac - 0.2).abs() < 0.04);
    }

    #[test]
    fn zero_drift_is_stationary() {
        let cfg = DriftConfig { drift_rate: 0.0, ..DriftConfig::default() };
        let m0 = cfg.class_mean(0);
        assert!((0..64).all(|t| cfg.class_mean(t) == m0));
    }

    #[test]
    fn clean_window_classifier_is_accurate() {
        // Oracle: sweep every threshold on the mean of the last 16 values.
        let cfg = DriftConfig { drift_rate: 0.0, n: 1000, ..DriftConfig::default() };
        let d = gen_drift_classification(&cfg, &mut SeededRng::new(4)).unwrap();
        let stat: Vec<(f64, usize)> = d
            .samples()
            .iter()
            .map(|s| {
                let tail = &s.values[s.values.len() - 16..];
                (tail.iter().sum::<f64>() / 16.0, s.label.unwrap().class().unwrap())
            })
            .collect();
        let best =
            stat.iter().map(|&(th, _)| stat.iter().filter(|&&(v, c)| (v > th) == (c == 1)).count()).max().unwrap();
        assert!(best as f64 / 1000.0 >= 0.9);
    }

    #[test]
    fn rejects_bad_config() {
        let mut r = SeededRng::new(0);
        assert!(gen_drift_classification(&DriftConfig { label_noise: 0.5, ..DriftConfig::default() }, &mut r).is_err());
        assert!(gen_drift_classification(&DriftConfig { drift_rate: -1.0, ..DriftConfig::default() }, &mut r).is_err());
        assert!(gen_sine_regression(&SineConfig { freq_min: 0.0, ..SineConfig::default() }, &mut r).is_err());
    }
}
