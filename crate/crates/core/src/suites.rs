//! Executable invariant checks.
//!
//! Each suite draws its inputs from its own named sub-stream of one seed and
//! returns a [`SuiteResult`]; [`run_all`] runs them (in parallel when
//! available) and returns results in a fixed order, so the serialized output
//! depends only on the seed and options.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::exec::Exec;
use crate::loss::{
    baseline_confidence_loss, crucial_sin, crucial_value, kappa_with, loss_gradient_factor, CrucialConfig, KappaRule,
    MuPolicy, BETA_CAP,
};
use crate::numerics::{erfc, lambert_w0, loss_stats, SeededRng, BRANCH_POINT};
use crate::sampler::{
    analytic_expected_errors, distribution_cycle_sim, ordering_check, sign_changes, CycleSimConfig, LossPopulation,
    Ordering,
};
use crate::trainer::{BaseLoss, Model, ModelKind, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Confidence rule under test; anything but the argmin should fail the
    /// argmin suite.
    pub kappa_rule: KappaRule,
    pub exec: Exec,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, kappa_rule: KappaRule::Argmin, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    /// Largest observed error in the suite's own units.
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

struct Tally {
    checked: usize,
    failures: usize,
    max_error: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Self { checked: 0, failures: 0, max_error: 0.0, first_failure: None }
    }

    /// Records one check with error `err` (NaN counts as failure).
    fn check(&mut self, ok: bool, err: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        if err.is_nan() || err > self.max_error {
            self.max_error = if err.is_nan() { f64::NAN } else { err };
        }
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn finish(self, name: &'static str, tolerance: f64) -> SuiteResult {
        SuiteResult {
            name,
            passed: self.failures == 0 && self.checked > 0,
            checked: self.checked,
            failures: self.failures,
            max_error: self.max_error,
            tolerance,
            detail: self.first_failure.unwrap_or_default(),
        }
    }
}

type Suite = fn(&SuiteOptions, &mut SeededRng) -> SuiteResult;

const SUITES: &[(&str, Suite)] = &[
    ("lambert-residual", lambert_residual),
    ("lambert-monotone", lambert_monotone),
    ("kappa-argmin", kappa_argmin),
    ("kappa-bounds", kappa_bounds),
    ("translation-invariance", translation_invariance),
    ("homogeneity", homogeneity),
    ("generalization", generalization),
    ("differentiated-scaling", differentiated_scaling),
    ("sin-period", sin_period),
    ("envelope-gradient", envelope_gradient),
    ("skewness-invariance", skewness_invariance),
    ("erfc-symmetry", erfc_symmetry),
    ("normal-ordering", normal_ordering),
    ("cycle-sign-changes", cycle_sign_changes),
    ("model-gradients", model_gradients),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs every suite; results come back in registration order.
pub fn run_all(opts: &SuiteOptions) -> Vec<SuiteResult> {
    let root = SeededRng::new(opts.seed);
    opts.exec.map_ranges(SUITES.len(), 1, |k, _| {
        let (name, f) = SUITES[k];
        f(opts, &mut root.derive(name))
    })
}

/// Runs the named suite, if it exists.
pub fn run_one(name: &str, opts: &SuiteOptions) -> Option<SuiteResult> {
    let (n, f) = SUITES.iter().find(|(n, _)| *n == name)?;
    Some(f(opts, &mut SeededRng::new(opts.seed).derive(n)))
}

/// Golden-section minimum of `kappa (l - eps) + lambda ln(kappa)^2` over
/// `ln kappa` in `[-60, 1]`.
pub fn argmin_by_search(loss: f64, threshold: f64, lambda: f64) -> f64 {
    let f = |x: f64| x.exp() * (loss - threshold) + lambda * x * x;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-60.0f64, 1.0f64);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    ((a + b) / 2.0).exp()
}

fn lambert_residual(_: &SuiteOptions, _: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let n = 10_000;
    for i in 0..n {
        let x = BRANCH_POINT + (10.0 - BRANCH_POINT) * i as f64 / (n - 1) as f64;
        let w = lambert_w0(x).unwrap_or(f64::NAN);
        let r = (w * w.exp() - x).abs();
        t.check(r <= 1e-12, r, || format!("x = {x}: residual {r}"));
    }
    t.finish("lambert-residual", 1e-12)
}

fn lambert_monotone(_: &SuiteOptions, _: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let n = 100_000;
    let mut prev = -1.0;
    for i in 0..n {
        let x = BRANCH_POINT + (10.0 - BRANCH_POINT) * i as f64 / (n - 1) as f64;
        let w = lambert_w0(x).unwrap_or(f64::NAN);
        let drop = (prev - w).max(0.0);
        t.check(w >= prev, drop, || format!("decrease at x = {x}"));
        prev = w;
    }
    t.finish("lambert-monotone", 0.0)
}

fn kappa_argmin(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..1000 {
        let l = rng.random_range(0.0..3.0);
        let eps = rng.random_range(0.0..3.0);
        let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
        let k = kappa_with(o.kappa_rule, l, eps, lambda).unwrap_or(f64::NAN);
        let want = argmin_by_search(l, eps, lambda);
        let err = (k - want).abs();
        t.check(err <= 1e-6, err, || format!("l={l} eps={eps} lambda={lambda}: {k} vs {want}"));
    }
    let at = kappa_with(o.kappa_rule, 0.7, 0.7, 0.05).unwrap_or(f64::NAN);
    t.check(at == 1.0, (at - 1.0).abs(), || format!("kappa at threshold is {at}"));
    for beta in [BETA_CAP, -1.0, -10.0] {
        let cap = kappa_with(o.kappa_rule, 1.0 + 0.05 * beta, 1.0, 0.05).unwrap_or(f64::NAN);
        t.check((cap - E).abs() <= 1e-12, (cap - E).abs(), || format!("cap at beta {beta} is {cap}"));
    }
    t.finish("kappa-argmin", 1e-6)
}

fn kappa_bounds(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..10_000 {
        let l = rng.random_range(-1e3..1e3);
        let eps = rng.random_range(-1e3..1e3);
        let lambda = 10f64.powf(rng.random_range(-4.0..2.0));
        let k = kappa_with(o.kappa_rule, l, eps, lambda).unwrap_or(f64::NAN);
        let over = if k > 0.0 { (k - E).max(0.0) } else { 1.0 };
        t.check(k > 0.0 && k <= E, over, || format!("kappa {k} at l={l} eps={eps} lambda={lambda}"));
    }
    t.finish("kappa-bounds", 0.0)
}

fn modulate(rule: KappaRule, l: f64, eps: f64, lambda: f64) -> (f64, f64) {
    let k = kappa_with(rule, l, eps, lambda).unwrap_or(f64::NAN);
    (k, crucial_value(l, eps, k, lambda))
}

fn translation_invariance(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..1000 {
        let l = rng.random_range(0.0..4.0);
        let eps = rng.random_range(0.0..4.0);
        let lambda = rng.random_range(0.01..1.0);
        let c: f64 = rng.random_range(-4.0..4.0);
        let (k0, v0) = modulate(o.kappa_rule, l, eps, lambda);
        let (k1, v1) = modulate(o.kappa_rule, l + c, eps + c, lambda);
        let err = ((k1 - k0).abs() / k0.max(1.0)).max((v1 - v0).abs() / v0.abs().max(1.0));
        t.check(err <= 1e-12, err, || format!("l={l} eps={eps} C={c}: ({k0},{v0}) vs ({k1},{v1})"));
    }
    t.finish("translation-invariance", 1e-12)
}

fn homogeneity(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..1000 {
        let l = rng.random_range(0.0..4.0);
        let eps = rng.random_range(0.0..4.0);
        let lambda = rng.random_range(0.01..1.0);
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let (_, v0) = modulate(o.kappa_rule, l, eps, lambda);
        let (_, v1) = modulate(o.kappa_rule, c * l, c * eps, c * lambda);
        let err = (v1 - c * v0).abs() / (c * v0).abs().max(f64::MIN_POSITIVE);
        let err = if v0 == 0.0 && v1 == 0.0 { 0.0 } else { err };
        t.check(err <= 1e-10, err, || format!("l={l} eps={eps} lambda={lambda} C={c}: {v1} vs {}", c * v0));
    }
    t.finish("homogeneity", 1e-10)
}

fn generalization(_: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..1000 {
        let l = rng.random_range(-5.0..5.0);
        let eps = rng.random_range(-5.0..5.0);
        let lambda = rng.random_range(0.001..1.0);
        let v = crucial_value(l, eps, 1.0, lambda);
        let (_, u) = modulate(KappaRule::Unit, l, eps, lambda);
        let err = (v - (l - eps)).abs().max((u - (l - eps)).abs());
        t.check(err == 0.0, err, || format!("l={l} eps={eps}: {v}"));
    }
    t.finish("generalization", 0.0)
}

fn differentiated_scaling(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let lambda = 0.01;
    for _ in 0..1000 {
        let eps = rng.random_range(0.5..1.5);
        let li = eps - rng.random_range(1e-6..1.0);
        let lj = eps + rng.random_range(1e-6..1.0);
        let (ki, vi) = modulate(o.kappa_rule, li, eps, lambda);
        let (kj, vj) = modulate(o.kappa_rule, lj, eps, lambda);
        let (ri, rj) = (vi / (li - eps), vj / (lj - eps));
        let ok = ri > rj && ki > 1.0 && kj < 1.0;
        t.check(ok, (rj - ri).max(0.0), || {
            format!("eps={eps} li={li} lj={lj}: ratios {ri} / {rj}, kappas {ki} / {kj}")
        });
    }
    t.finish("differentiated-scaling", 0.0)
}

fn sin_period(o: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let cfg =
        CrucialConfig { kappa_rule: o.kappa_rule, ..CrucialConfig::sin(PI / 4.0, 0.0, MuPolicy::FixedValue(1.0)) };
    for _ in 0..1000 {
        let mu = rng.random_range(0.1..3.0);
        let l = rng.random_range(0.0..3.0 * mu);
        let epoch = rng.random_range(0..1000usize);
        let a = crucial_sin(l, epoch, mu, &cfg);
        let b = crucial_sin(l, epoch + 4, mu, &cfg);
        let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
        t.check(same, if same { 0.0 } else { 1.0 }, || format!("epoch {epoch}, l={l}, mu={mu}"));
        if epoch % 4 == 0 {
            let v = a.map(|m| m.value).unwrap_or(f64::NAN);
            let err = (v - (l - mu)).abs();
            t.check(err <= 1e-12, err, || format!("epoch {epoch}: value {v}, expected {}", l - mu));
        } else if epoch % 4 == 2 && l >= mu / 2.0 {
            let v = a.map(|m| m.value).unwrap_or(f64::NAN);
            t.check(v == 0.0, v.abs(), || format!("epoch {epoch}: value {v}, expected 0"));
        }
    }
    t.finish("sin-period", 0.0)
}

fn envelope_gradient(_: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..1000 {
        let l = rng.random_range(0.0..3.0);
        let eps = rng.random_range(0.0..3.0);
        let lambda = rng.random_range(0.01..1.0);
        if ((l - eps) / lambda - BETA_CAP).abs() < 1e-3 {
            continue;
        }
        let v = |x: f64| baseline_confidence_loss(x, eps, lambda).map(|m| m.value).unwrap_or(f64::NAN);
        let h = 1e-6 * lambda;
        let fd = (v(l + h) - v(l - h)) / (2.0 * h);
        let factor = baseline_confidence_loss(l, eps, lambda).map(|m| loss_gradient_factor(&m)).unwrap_or(f64::NAN);
        let err = (fd - factor).abs();
        t.check(err <= 1e-6, err, || format!("l={l} eps={eps} lambda={lambda}: fd {fd} vs {factor}"));
    }
    t.finish("envelope-gradient", 1e-6)
}

fn skewness_invariance(_: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..200 {
        let n = rng.random_range(3..100);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
        let shift = rng.random_range(-100.0..100.0);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let Ok(base) = loss_stats(&xs) else { continue };
        if base.std_dev < 1e-3 {
            continue;
        }
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let s = loss_stats(&moved).map(|s| s.skewness).unwrap_or(f64::NAN);
        let err = (s - base.skewness).abs() / base.skewness.abs().max(1.0);
        t.check(err <= 1e-9, err, || format!("n={n} shift={shift} scale={scale}"));
        let again = loss_stats(&xs).ok();
        t.check(again == Some(base), 0.0, || "recomputation differs".into());
    }
    t.finish("skewness-invariance", 1e-9)
}

fn erfc_symmetry(_: &SuiteOptions, _: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for i in 0..=1200 {
        let x = -6.0 + 0.01 * i as f64;
        let err = (erfc(-x) - (2.0 - erfc(x))).abs();
        t.check(err <= 1e-10, err, || format!("x = {x}"));
    }
    t.finish("erfc-symmetry", 1e-10)
}

fn normal_ordering(_: &SuiteOptions, _: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    for &sigma in &[0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0] {
        for &rate in &[0.5, 1.0, 2.0] {
            let pop = LossPopulation::Normal { mu: 1.0, sigma };
            let (gap, ord) = match (analytic_expected_errors(&pop, rate), ordering_check(&pop, rate)) {
                (Ok(a), Ok(o)) => (a.e_p - a.e_u, o),
                _ => (f64::NAN, Ordering::Inconclusive),
            };
            let want = rate * rate * sigma.powi(4);
            let err = (gap - want).abs() / want;
            t.check(err <= 1e-12 && ord == Ordering::UBeatsP, err, || {
                format!("sigma={sigma} rate={rate}: gap {gap}, ordering {ord:?}")
            });
        }
    }
    t.finish("normal-ordering", 1e-12)
}

fn cycle_sign_changes(_: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let cfg = CycleSimConfig::default();
    let need = cfg.epochs / 10;
    let changes = distribution_cycle_sim(&cfg, rng)
        .map(|s| sign_changes(&s.iter().map(|x| x.skewness).collect::<Vec<_>>()))
        .unwrap_or(0);
    t.check(changes >= need, need.saturating_sub(changes) as f64, || format!("{changes} sign changes, need {need}"));
    let mut r = t.finish("cycle-sign-changes", need as f64);
    if r.passed {
        r.detail = format!("{changes} sign changes over {} epochs", cfg.epochs);
    }
    r
}

/// Norm-relative error of the analytic gradient against centered differences.
pub fn gradient_error(model: &Model, x: &[f64], target: Target, loss: BaseLoss) -> f64 {
    let mut g = vec![0.0; model.params.len()];
    if model.loss_and_grad(x, target, loss, &mut g).is_err() {
        return f64::NAN;
    }
    let h = 1e-5;
    let mut m = model.clone();
    let mut diff2 = 0.0;
    for (k, &gk) in g.iter().enumerate() {
        let p = m.params[k];
        m.params[k] = p + h;
        let up = m.loss(x, target, loss).unwrap_or(f64::NAN);
        m.params[k] = p - h;
        let down = m.loss(x, target, loss).unwrap_or(f64::NAN);
        m.params[k] = p;
        let fd = (up - down) / (2.0 * h);
        diff2 += (gk - fd) * (gk - fd);
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff2.sqrt() / norm.max(1e-8)
}

fn model_gradients(_: &SuiteOptions, rng: &mut SeededRng) -> SuiteResult {
    let mut t = Tally::new();
    let kinds = [ModelKind::Linear, ModelKind::Mlp { hidden: vec![6, 4] }, ModelKind::Elman { hidden: 5 }];
    for kind in kinds {
        for draw in 0..100 {
            let loss = if draw % 2 == 0 { BaseLoss::Mse } else { BaseLoss::CrossEntropy };
            let outputs = if loss == BaseLoss::Mse { 1 } else { 3 };
            let Ok(model) = Model::new(kind.clone(), 5, 2, outputs, rng) else {
                t.check(false, f64::NAN, || format!("{kind:?}: construction failed"));
                continue;
            };
            let x: Vec<f64> = (0..10).map(|_| StandardNormal.sample(rng)).collect();
            let target = match loss {
                BaseLoss::Mse => Target::Real(StandardNormal.sample(rng)),
                BaseLoss::CrossEntropy => Target::Class(rng.random_range(0..3)),
            };
            let err = gradient_error(&model, &x, target, loss);
            t.check(err <= 1e-4, err, || format!("{kind:?} draw {draw}: relative error {err}"));
        }
    }
    t.finish("model-gradients", 1e-4)
}
