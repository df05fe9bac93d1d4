//! The curricular and cyclical loss family.
//!
//! Every variant wraps a per-sample base loss `l` as
//!
//! ```text
//! L = kappa * (l - eps) + lambda * ln(kappa)^2
//! ```
//!
//! with `kappa` set to the minimizer of that expression, which has the closed
//! form `kappa = exp(-W0(beta / 2))` for `beta = (l - eps) / lambda`, capped at
//! `e` once `beta <= -2/e`. The variants differ only in how `eps` (and for the
//! sine schedule, `lambda`) are chosen per epoch:
//!
//! * [`Variant::Baseline`]: fixed caller-supplied threshold.
//! * [`Variant::Adp`]: `eps_t = skewness * mean` of the previous epoch's losses.
//! * [`Variant::Sin`]: threshold, gate and `lambda` follow `F = sin^2(omega t + phase)`.
//!
//! Because `kappa` is the argmin, `dL/dl = kappa`; trainers use
//! [`loss_gradient_factor`] as a detached per-sample weight.

mod trace;

pub use trace::{write_loss_trace, TraceRow};

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lambert_w0, loss_stats, LossStats, BRANCH_POINT};

/// Default regularization; the largest value that keeps the exponential
/// selection rate inside the range covered by the half-normal error bound.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// `beta` at or below this gets the capped confidence `e`.
pub const BETA_CAP: f64 = -2.0 / E;

/// `F` closer than this to 0 or 1 is treated as exactly 0 or 1.
const SIN_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Baseline,
    Sin,
    Adp,
}

/// How the sine schedule obtains its base threshold `mu_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuPolicy {
    /// Mean loss of the previous epoch.
    EpochMean,
    /// A constant, e.g. `ln C` for C-class cross-entropy.
    FixedValue(f64),
}

/// Closed form used for the confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaRule {
    /// `exp(-W0(max(-2/e, beta) / 2))`, the exact minimizer.
    #[default]
    Argmin,
    /// `exp(-W0(max(-1/e, beta)) / 2)`. Not a minimizer; kept for
    /// comparison with published results that used it.
    MainText,
    /// `kappa = 1` regardless of input (plain shifted loss).
    Unit,
}

/// Sign convention for the sine schedule's threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinThreshold {
    /// `eps = (1 - F) mu_l`: equals `mu_l` at `F = 0`, `mu_l / 2` at
    /// `F = 1/2`, `0` at `F = 1`, matching the period-4 reference table.
    #[default]
    Mirrored,
    /// `eps = 2 * gate - mu_l = (F - 1) mu_l`, the state function taken literally.
    AsWritten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrucialConfig {
    pub variant: Variant,
    /// Regularization `lambda`; ignored by [`Variant::Sin`], which uses `-ln F`.
    pub lambda: f64,
    /// Angular frequency of the sine schedule, radians per epoch.
    pub omega: f64,
    /// Phase of the sine schedule, radians.
    pub phase: f64,
    pub mu_policy: MuPolicy,
    pub kappa_rule: KappaRule,
    pub sin_threshold: SinThreshold,
    /// Threshold used by [`Variant::Baseline`].
    pub baseline_threshold: f64,
    /// Enforce `lambda <= 0.01`.
    pub small_lambda_only: bool,
}

impl Default for CrucialConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Adp,
            lambda: DEFAULT_LAMBDA,
            omega: PI / 4.0,
            phase: 0.0,
            mu_policy: MuPolicy::EpochMean,
            kappa_rule: KappaRule::Argmin,
            sin_threshold: SinThreshold::Mirrored,
            baseline_threshold: 0.0,
            small_lambda_only: false,
        }
    }
}

impl CrucialConfig {
    pub fn adp(lambda: f64) -> Self {
        Self { variant: Variant::Adp, lambda, ..Self::default() }
    }

    pub fn sin(omega: f64, phase: f64, mu_policy: MuPolicy) -> Self {
        Self { variant: Variant::Sin, omega, phase, mu_policy, ..Self::default() }
    }

    pub fn baseline(threshold: f64, lambda: f64) -> Self {
        Self { variant: Variant::Baseline, lambda, baseline_threshold: threshold, ..Self::default() }
    }

    pub fn with_kappa_rule(mut self, rule: KappaRule) -> Self {
        self.kappa_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("{} is not > 0", self.lambda)));
        }
        if self.small_lambda_only && self.lambda > DEFAULT_LAMBDA {
            return Err(Error::invalid("lambda", format!("{} exceeds 0.01 in small-lambda mode", self.lambda)));
        }
        if self.variant == Variant::Sin {
            if !(self.omega.is_finite() && self.omega != 0.0) {
                return Err(Error::invalid("omega", "sine schedule needs a finite nonzero omega"));
            }
            if !self.phase.is_finite() {
                return Err(Error::invalid("phase", "must be finite"));
            }
        }
        if let MuPolicy::FixedValue(mu) = self.mu_policy {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::invalid("mu_l", format!("{mu} is not > 0")));
            }
        }
        if !self.baseline_threshold.is_finite() {
            return Err(Error::invalid("threshold", "must be finite"));
        }
        Ok(())
    }
}

/// One sample's modulated loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatedLoss {
    pub input_loss: f64,
    /// Confidence; 0 when the sample is gated out or fully suppressed.
    pub kappa: f64,
    /// Threshold `eps` the loss was measured against.
    pub threshold: f64,
    /// Selection gate of the sine schedule; `None` for other variants.
    pub epoch_threshold: Option<f64>,
    /// Regularization actually used (`-ln F` for the sine schedule).
    pub lambda: f64,
    pub value: f64,
    pub selected: bool,
}

/// Per-epoch threshold state of the adaptive variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochState {
    pub epoch_index: usize,
    /// Statistics of the losses seen during epoch `epoch_index - 1` (or of a
    /// priming pass before epoch 0).
    pub prev_stats: Option<LossStats>,
    /// `eps_t = skewness * mean` of `prev_stats`; 0 before the first
    /// completed epoch.
    pub threshold: f64,
}

impl EpochState {
    pub fn initial() -> Self {
        Self { epoch_index: 0, prev_stats: None, threshold: 0.0 }
    }

    /// State for the epoch after the one that produced `losses`.
    pub fn next(&self, losses: &[f64]) -> Result<Self> {
        let stats = loss_stats(losses)?;
        Ok(Self { epoch_index: self.epoch_index + 1, prev_stats: Some(stats), threshold: stats.skewness * stats.mean })
    }
}

impl Default for EpochState {
    fn default() -> Self {
        Self::initial()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("lambda", format!("{lambda} is not > 0")));
    }
    Ok(())
}

fn check_finite(value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { index: 0, value })
    }
}

/// Returns `(kappa, ln kappa)` under `rule`.
fn confidence(rule: KappaRule, loss: f64, threshold: f64, lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    check_finite(loss)?;
    check_finite(threshold)?;
    let beta = (loss - threshold) / lambda;
    Ok(match rule {
        KappaRule::Argmin => {
            if beta <= BETA_CAP {
                (E, 1.0)
            } else {
                let log_kappa = -lambert_w0(beta / 2.0)?;
                (log_kappa.exp(), log_kappa)
            }
        }
        KappaRule::MainText => {
            let log_kappa = -0.5 * lambert_w0(beta.max(BRANCH_POINT))?;
            (log_kappa.exp(), log_kappa)
        }
        KappaRule::Unit => (1.0, 0.0),
    })
}

/// Closed-form confidence `exp(-W0(max(-2/e, beta) / 2))`.
pub fn kappa_star(loss: f64, threshold: f64, lambda: f64) -> Result<f64> {
    kappa_with(KappaRule::Argmin, loss, threshold, lambda)
}

pub fn kappa_with(rule: KappaRule, loss: f64, threshold: f64, lambda: f64) -> Result<f64> {
    confidence(rule, loss, threshold, lambda).map(|(k, _)| k)
}

/// `kappa (l - eps) + lambda ln(kappa)^2` for an arbitrary confidence.
pub fn crucial_value(loss: f64, threshold: f64, kappa: f64, lambda: f64) -> f64 {
    let log_kappa = kappa.ln();
    kappa * (loss - threshold) + lambda * log_kappa * log_kappa
}

fn modulated(
    rule: KappaRule,
    loss: f64,
    threshold: f64,
    lambda: f64,
    epoch_threshold: Option<f64>,
) -> Result<ModulatedLoss> {
    let (kappa, log_kappa) = confidence(rule, loss, threshold, lambda)?;
    Ok(ModulatedLoss {
        input_loss: loss,
        kappa,
        threshold,
        epoch_threshold,
        lambda,
        value: kappa * (loss - threshold) + lambda * log_kappa * log_kappa,
        selected: true,
    })
}

/// Confidence-weighted loss against a fixed threshold.
pub fn baseline_confidence_loss(loss: f64, threshold: f64, lambda: f64) -> Result<ModulatedLoss> {
    modulated(KappaRule::Argmin, loss, threshold, lambda, None)
}

/// Adaptive variant: threshold from the previous epoch's loss skewness.
pub fn crucial_adp(loss: f64, state: &EpochState, cfg: &CrucialConfig) -> Result<ModulatedLoss> {
    modulated(cfg.kappa_rule, loss, state.threshold, cfg.lambda, None)
}

/// `EpochState` for the epoch following one that produced `prev_losses`.
pub fn advance_epoch_adp(state: &EpochState, prev_losses: &[f64]) -> Result<EpochState> {
    state.next(prev_losses)
}

/// Smallest `p` with `omega * p` a nonzero multiple of `pi`, if one exists
/// below 4096. `sin^2` then repeats every `p` epochs.
pub fn sin_period(omega: f64) -> Option<usize> {
    (1..4096usize).find(|&p| {
        let k = omega * p as f64 / PI;
        let r = k.round();
        r != 0.0 && (k - r).abs() < 1e-9
    })
}

/// Periodic schedule value `F = sin^2(omega t + phase)`, snapped to exactly
/// 0 or 1 within 1e-12. When the schedule is periodic the epoch is reduced
/// modulo the period first, so epochs a whole period apart give bit-identical
/// `F`.
pub fn sin_schedule(epoch: usize, omega: f64, phase: f64) -> f64 {
    let t = match sin_period(omega) {
        Some(p) => epoch % p,
        None => epoch,
    };
    let s = (omega * t as f64 + phase).sin();
    let f = s * s;
    if f < SIN_SNAP {
        0.0
    } else if f > 1.0 - SIN_SNAP {
        1.0
    } else {
        f
    }
}

/// Sine-scheduled variant at `epoch` with base threshold `mu_l`.
///
/// Samples below the gate `F mu_l / 2` are dropped. `F = 0` is the
/// `lambda -> inf` limit (`kappa = 1`, plain shifted loss); `F = 1` is the
/// `lambda -> 0` limit, where every gated-in sample lies above the threshold
/// and is fully suppressed.
pub fn crucial_sin(loss: f64, epoch: usize, mu_l: f64, cfg: &CrucialConfig) -> Result<ModulatedLoss> {
    check_finite(loss)?;
    if !(mu_l.is_finite() && mu_l > 0.0) {
        return Err(Error::invalid("mu_l", format!("{mu_l} is not > 0")));
    }
    let f = sin_schedule(epoch, cfg.omega, cfg.phase);
    let gate = 0.5 * f * mu_l;
    let threshold = match cfg.sin_threshold {
        SinThreshold::Mirrored => mu_l - 2.0 * gate,
        SinThreshold::AsWritten => 2.0 * gate - mu_l,
    };
    if loss < gate {
        return Ok(ModulatedLoss {
            input_loss: loss,
            kappa: 0.0,
            threshold,
            epoch_threshold: Some(gate),
            lambda: -f.ln(),
            value: 0.0,
            selected: false,
        });
    }
    if f == 0.0 {
        return Ok(ModulatedLoss {
            input_loss: loss,
            kappa: 1.0,
            threshold,
            epoch_threshold: Some(gate),
            lambda: f64::INFINITY,
            value: loss - threshold,
            selected: true,
        });
    }
    if f == 1.0 {
        // Both terms vanish as lambda -> 0 with loss > threshold.
        let (kappa, value) = if loss > threshold {
            (0.0, 0.0)
        } else {
            // Only reachable with loss == threshold == 0 at the gate.
            (1.0, 0.0)
        };
        return Ok(ModulatedLoss {
            input_loss: loss,
            kappa,
            threshold,
            epoch_threshold: Some(gate),
            lambda: 0.0,
            value,
            selected: true,
        });
    }
    modulated(cfg.kappa_rule, loss, threshold, -f.ln(), Some(gate))
}

/// `dL/dl` of a modulated loss: `kappa` when selected, otherwise 0.
pub fn loss_gradient_factor(m: &ModulatedLoss) -> f64 {
    if m.selected {
        m.kappa
    } else {
        0.0
    }
}

/// Resolves `mu_l` for the sine schedule.
pub fn resolve_mu(policy: MuPolicy, prev_stats: Option<&LossStats>) -> Result<f64> {
    let mu = match policy {
        MuPolicy::FixedValue(v) => v,
        MuPolicy::EpochMean => {
            prev_stats.ok_or_else(|| Error::invalid("mu_l", "epoch-mean policy needs a previous epoch"))?.mean
        }
    };
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid("mu_l", format!("{mu} is not > 0")));
    }
    Ok(mu)
}

/// Drives one configured variant across epochs.
#[derive(Debug, Clone)]
pub struct Crucial {
    cfg: CrucialConfig,
    state: EpochState,
}

impl Crucial {
    pub fn new(cfg: CrucialConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: EpochState::initial() })
    }

    pub fn config(&self) -> &CrucialConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EpochState {
        &self.state
    }

    /// Records statistics of a pre-training pass so epoch 0 has a `mu_l`.
    /// The adaptive threshold stays at 0 for epoch 0.
    pub fn prime(&mut self, initial_losses: &[f64]) -> Result<()> {
        self.state.prev_stats = Some(loss_stats(initial_losses)?);
        Ok(())
    }

    /// Back to epoch 0, keeping the configuration.
    pub fn reset(&mut self) {
        self.state = EpochState::initial();
    }

    /// Resolved per-epoch context; call once per epoch and reuse.
    pub fn epoch_view(&self) -> Result<EpochView<'_>> {
        let mu_l = match self.cfg.variant {
            Variant::Sin => resolve_mu(self.cfg.mu_policy, self.state.prev_stats.as_ref())?,
            _ => f64::NAN,
        };
        Ok(EpochView { owner: self, mu_l })
    }

    pub fn modulate(&self, loss: f64) -> Result<ModulatedLoss> {
        self.epoch_view()?.modulate(loss)
    }

    /// Closes the current epoch with its raw per-sample losses.
    pub fn finish_epoch(&mut self, losses: &[f64]) -> Result<()> {
        self.state = self.state.next(losses)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochView<'a> {
    owner: &'a Crucial,
    mu_l: f64,
}

impl EpochView<'_> {
    pub fn modulate(&self, loss: f64) -> Result<ModulatedLoss> {
        let cfg = &self.owner.cfg;
        match cfg.variant {
            Variant::Baseline => modulated(cfg.kappa_rule, loss, cfg.baseline_threshold, cfg.lambda, None),
            Variant::Adp => crucial_adp(loss, &self.owner.state, cfg),
            Variant::Sin => crucial_sin(loss, self.owner.state.epoch_index, self.mu_l, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Golden-section minimization of `kappa (l - eps) + lambda ln(kappa)^2`
    /// over `x = ln kappa` in `[-60, 1]` (kappa in (0, e]).
    fn argmin_oracle(loss: f64, eps: f64, lambda: f64) -> f64 {
        let f = |x: f64| x.exp() * (loss - eps) + lambda * x * x;
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (-60.0f64, 1.0f64);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..400 {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        ((a + b) / 2.0).exp()
    }

    #[test]
    fn kappa_fixed_points() {
        assert_eq!(kappa_star(0.7, 0.7, 0.01).unwrap(), 1.0);
        let lam = 0.05;
        assert_eq!(kappa_star(1.0 - 2.0 * lam / E, 1.0, lam).unwrap(), E);
        assert_eq!(kappa_star(-50.0, 1.0, lam).unwrap(), E);
    }

    #[test]
    fn kappa_matches_scalar_minimization() {
        let k = kappa_star(1.0, 0.5, 0.01).unwrap();
        let want = argmin_oracle(1.0, 0.5, 0.01);
        assert!((k - want).abs() < 1e-8, "{k} vs {want}");
        let w25 = lambert_w0(25.0).unwrap();
        assert!((k - (-w25).exp()).abs() < 1e-15);
    }

    #[test]
    fn kappa_rejects_bad_lambda() {
        assert!(kappa_star(1.0, 0.0, 0.0).is_err());
        assert!(kappa_star(1.0, 0.0, -1.0).is_err());
        assert!(kappa_star(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn main_text_rule_is_not_the_minimizer() {
        let (l, eps, lam) = (1.0, 0.5, 0.01);
        let wrong = kappa_with(KappaRule::MainText, l, eps, lam).unwrap();
        assert!((wrong - argmin_oracle(l, eps, lam)).abs() > 1e-3);
    }

    #[test]
    fn adp_first_epoch() {
        let cfg = CrucialConfig::adp(0.01);
        let state = EpochState::initial();
        let m = crucial_adp(0.7, &state, &cfg).unwrap();
        let kappa = argmin_oracle(0.7, 0.0, 0.01);
        assert!((m.kappa - kappa).abs() < 1e-8);
        let want = kappa * 0.7 + 0.01 * kappa.ln().powi(2);
        assert!((m.value - want).abs() < 1e-9);
        assert!(m.selected);
    }

    #[test]
    fn adp_loss_at_threshold_is_zero() {
        let cfg = CrucialConfig::adp(0.01);
        let state = EpochState { threshold: 0.3, ..EpochState::initial() };
        let m = crucial_adp(0.3, &state, &cfg).unwrap();
        assert_eq!((m.kappa, m.value), (1.0, 0.0));
    }

    #[test]
    fn adp_threshold_from_skewed_epoch() {
        let s = advance_epoch_adp(&EpochState::initial(), &[0.2, 0.2, 0.2, 1.0]).unwrap();
        let stats = loss_stats(&[0.2, 0.2, 0.2, 1.0]).unwrap();
        assert!((s.threshold - stats.skewness * 0.4).abs() < 1e-15);
        assert!((s.threshold - 0.46188).abs() < 1e-5);
        assert_eq!(s.epoch_index, 1);

        let sym = advance_epoch_adp(&EpochState::initial(), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sym.threshold, 0.0);
        let left = advance_epoch_adp(&EpochState::initial(), &[1.0, 1.0, 1.0, 0.1]).unwrap();
        assert!(left.threshold < 0.0);
        assert!(advance_epoch_adp(&EpochState::initial(), &[]).is_err());
    }

    fn sin_cfg() -> CrucialConfig {
        CrucialConfig::sin(PI / 4.0, 0.0, MuPolicy::FixedValue(0.8))
    }

    #[test]
    fn sin_reference_schedule() {
        let cfg = sin_cfg();
        let mu = 0.8;
        for n in 0..5 {
            for &l in &[0.0, 0.1, 0.5, 2.0] {
                let m = crucial_sin(l, 4 * n, mu, &cfg).unwrap();
                assert!(m.selected);
                assert_eq!(m.kappa, 1.0);
                assert!((m.value - (l - mu)).abs() < 1e-15);
            }
            for &l in &[0.4, 0.5, 3.0] {
                let m = crucial_sin(l, 4 * n + 2, mu, &cfg).unwrap();
                assert!(m.selected);
                assert_eq!(m.value, 0.0);
                assert_eq!(loss_gradient_factor(&m), 0.0);
            }
            let gated = crucial_sin(0.19, 4 * n + 1, mu, &cfg).unwrap();
            assert!(!gated.selected);
            assert_eq!(gated.value, 0.0);
            let kept = crucial_sin(0.21, 4 * n + 3, mu, &cfg).unwrap();
            assert!(kept.selected);
            assert!((kept.threshold - mu / 2.0).abs() < 1e-12);
            assert!((kept.lambda - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn sin_period_four_is_bit_identical() {
        let cfg = sin_cfg();
        for t in 0..40 {
            for &l in &[0.05, 0.3, 0.6, 1.7] {
                let a = crucial_sin(l, t, 0.8, &cfg).unwrap();
                let b = crucial_sin(l, t + 4, 0.8, &cfg).unwrap();
                assert_eq!(a, b);
            }
        }
        assert_eq!(sin_period(PI / 4.0), Some(4));
        assert_eq!(sin_period(1.0), None);
    }

    #[test]
    fn sin_as_written_threshold_sign() {
        let cfg = CrucialConfig { sin_threshold: SinThreshold::AsWritten, ..sin_cfg() };
        let m = crucial_sin(1.0, 1, 0.8, &cfg).unwrap();
        assert!((m.threshold + 0.4).abs() < 1e-12);
    }

    #[test]
    fn sin_rejects_nonpositive_mu() {
        assert!(crucial_sin(1.0, 1, 0.0, &sin_cfg()).is_err());
        assert!(resolve_mu(MuPolicy::EpochMean, None).is_err());
        let zero = loss_stats(&[0.0, 0.0]).unwrap();
        assert!(resolve_mu(MuPolicy::EpochMean, Some(&zero)).is_err());
    }

    #[test]
    fn baseline_weighting_direction() {
        let ln2 = 2f64.ln();
        let at = baseline_confidence_loss(ln2, ln2, 0.01).unwrap();
        assert_eq!(at.value, 0.0);
        assert!(baseline_confidence_loss(3.0, ln2, 0.01).unwrap().kappa < 1.0);
        assert!(baseline_confidence_loss(0.05, ln2, 0.01).unwrap().kappa > 1.0);
    }

    #[test]
    fn gradient_factor_cases() {
        let m = baseline_confidence_loss(0.4, 0.4, 0.1).unwrap();
        assert_eq!(loss_gradient_factor(&m), 1.0);
        let off = ModulatedLoss { selected: false, ..m };
        assert_eq!(loss_gradient_factor(&off), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(CrucialConfig::adp(0.0).validate().is_err());
        let strict = CrucialConfig { small_lambda_only: true, ..CrucialConfig::adp(0.02) };
        assert!(strict.validate().is_err());
        let zero_omega = CrucialConfig { omega: 0.0, ..sin_cfg() };
        assert!(zero_omega.validate().is_err());
        assert!(CrucialConfig::adp(0.01).validate().is_ok());
    }

    #[test]
    fn driver_tracks_epochs() {
        let mut c = Crucial::new(CrucialConfig::adp(0.01)).unwrap();
        assert_eq!(c.state().threshold, 0.0);
        c.finish_epoch(&[0.2, 0.2, 0.2, 1.0]).unwrap();
        assert_eq!(c.state().epoch_index, 1);
        assert!(c.state().threshold > 0.46);
        c.reset();
        assert_eq!(c.state(), &EpochState::initial());

        let mut s = Crucial::new(CrucialConfig::sin(PI / 4.0, 0.0, MuPolicy::EpochMean)).unwrap();
        assert!(s.modulate(1.0).is_err());
        s.prime(&[1.0, 3.0]).unwrap();
        assert_eq!(s.state().threshold, 0.0);
        let m = s.modulate(1.0).unwrap();
        assert!((m.value - (1.0 - 2.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn envelope_gradient_equals_kappa(
            l in -3.0f64..3.0, eps in -3.0f64..3.0, lambda in 0.01f64..2.0,
        ) {
            let beta = (l - eps) / lambda;
            prop_assume!((beta - BETA_CAP).abs() > 1e-3);
            let value = |x: f64| baseline_confidence_loss(x, eps, lambda).unwrap().value;
            let h = 1e-6 * lambda;
            let fd = (value(l + h) - value(l - h)) / (2.0 * h);
            let m = baseline_confidence_loss(l, eps, lambda).unwrap();
            prop_assert!((fd - loss_gradient_factor(&m)).abs() < 1e-6, "fd {} kappa {}", fd, m.kappa);
        }

        #[test]
        fn kappa_stays_in_bounds(l in -1e3f64..1e3, eps in -1e3f64..1e3, lambda in 1e-4f64..10.0) {
            let k = kappa_star(l, eps, lambda).unwrap();
            prop_assert!(k > 0.0 && k <= E);
        }
    }
}
