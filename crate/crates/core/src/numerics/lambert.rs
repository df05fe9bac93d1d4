use std::f64::consts::E;

use crate::error::{Error, Result};

/// The branch point `-1/e` of the principal branch.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Inputs this far below the branch point are treated as rounding noise.
const BRANCH_SLACK: f64 = 1e-15;

const MAX_HALLEY_STEPS: usize = 12;

/// Principal branch of the Lambert W function: the `w >= -1` solving
/// `w * exp(w) = x`.
///
/// Starts from a branch-point series, a log-based guess or the asymptotic
/// expansion depending on `x`, then polishes with Halley steps until the
/// update stalls. Very large arguments switch to Newton on `w + ln w = ln x`
/// so `exp(w)` never overflows.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_SLACK {
        return Err(Error::LambertDomain(x));
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x > 1e100 {
        return Ok(w0_log_newton(x));
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_HALLEY_STEPS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2(ex + 1)) around the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let l = (1.0 + x).ln();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn w0_log_newton(x: f64) -> f64 {
    let lx = x.ln();
    let mut w = lx - lx.ln();
    for _ in 0..50 {
        let g = w + w.ln() - lx;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: f64) -> f64 {
        let w = lambert_w0(x).unwrap();
        (w * w.exp() - x).abs()
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w0(BRANCH_POINT).unwrap(), -1.0);
    }

    #[test]
    fn omega_constant() {
        // Oracle: plain fixed-point iteration w <- exp(-w), converges since |exp(-w)| < 1 near 0.567.
        let mut w = 0.5_f64;
        for _ in 0..200 {
            w = (-w).exp();
        }
        assert!((w * w.exp() - 1.0).abs() < 1e-15);
        let got = lambert_w0(1.0).unwrap();
        assert!((got - w).abs() < 1e-14, "{got} vs {w}");
        assert!((got - 0.5671432904).abs() < 1e-10);
    }

    #[test]
    fn slightly_below_branch_clamps() {
        assert_eq!(lambert_w0(BRANCH_POINT - 5e-16).unwrap(), -1.0);
        assert!(matches!(lambert_w0(BRANCH_POINT - 1e-10), Err(Error::LambertDomain(_))));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn residual_on_dense_grid() {
        let n = 10_000;
        for i in 0..=n {
            let x = BRANCH_POINT + (10.0 - BRANCH_POINT) * i as f64 / n as f64;
            assert!(residual(x) <= 1e-12, "x = {x}, residual = {}", residual(x));
        }
    }

    #[test]
    fn near_branch_point() {
        for k in 1..16 {
            let x = BRANCH_POINT + 10f64.powi(-k);
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0);
            assert!(residual(x) <= 1e-15, "x = {x}");
        }
    }

    #[test]
    fn large_arguments_are_relative_accurate() {
        for &x in &[1e3, 1e8, 1e50, 1e99, 1e101, 1e200, f64::MAX] {
            let w = lambert_w0(x).unwrap();
            let rel = (w + w.ln() - x.ln()).abs() / x.ln();
            assert!(rel < 1e-14, "x = {x}, w = {w}");
        }
        assert_eq!(lambert_w0(f64::INFINITY).unwrap(), f64::INFINITY);
    }
}
