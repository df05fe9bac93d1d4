use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{check_rate, LossPopulation};
use crate::error::Result;
use crate::numerics::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticErrors {
    pub e_u: f64,
    pub e_p: f64,
    /// Correction term of the half-normal bound; `None` for normal populations.
    pub diamond: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    UBeatsP,
    PBeatsU,
    Inconclusive,
}

impl Ordering {
    /// Lower error wins; ties within `tol` are inconclusive.
    pub fn compare(e_u: f64, e_p: f64, tol: f64) -> Self {
        if (e_u - e_p).abs() <= tol {
            Self::Inconclusive
        } else if e_u < e_p {
            Self::UBeatsP
        } else {
            Self::PBeatsU
        }
    }
}

/// Closed-form `E_U` and `E_P`.
///
/// Normal: `E_U = sigma^2`, `E_P = rate^2 sigma^4 + sigma^2`.
///
/// Half-normal: `E_U = sigma^2 (1 - 2/pi)` and
/// `E_P = sigma^2 (2/pi + 1) + (2 sigma (2/pi) + rate sigma^2)(rate sigma^2 - D)`
/// with `D = sqrt(2) sigma exp(-sigma^2 rate^2 / 2) / (sqrt(pi) erfc(sigma rate / sqrt(2)))`.
/// The half-normal `E_P` is a transcription, not a derivation; compare it
/// against [`super::mc_expected_errors`] before relying on it.
pub fn analytic_expected_errors(pop: &LossPopulation, rate: f64) -> Result<AnalyticErrors> {
    pop.validate()?;
    check_rate(rate)?;
    let s = pop.sigma();
    let s2 = s * s;
    Ok(match pop {
        LossPopulation::Normal { .. } => AnalyticErrors { e_u: s2, e_p: rate * rate * s2 * s2 + s2, diamond: None },
        LossPopulation::HalfNormal { .. } => {
            let d = SQRT_2 * s * (-0.5 * s2 * rate * rate).exp() / (PI.sqrt() * erfc(s * rate / SQRT_2));
            AnalyticErrors {
                e_u: s2 * (1.0 - FRAC_2_PI),
                e_p: s2 * (FRAC_2_PI + 1.0) + (2.0 * s * FRAC_2_PI + rate * s2) * (rate * s2 - d),
                diamond: Some(d),
            }
        }
    })
}

/// Which condition the closed forms favour.
pub fn ordering_check(pop: &LossPopulation, rate: f64) -> Result<Ordering> {
    let a = analytic_expected_errors(pop, rate)?;
    Ok(Ordering::compare(a.e_u, a.e_p, 1e-12 * a.e_u.abs().max(a.e_p.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn normal_closed_form() {
        let a = analytic_expected_errors(&LossPopulation::Normal { mu: 1.0, sigma: 0.5 }, 1.0).unwrap();
        assert_eq!(a.e_u, 0.25);
        assert_eq!(a.e_p, 0.3125);
        assert_eq!(a.diamond, None);
    }

    #[test]
    fn normal_small_rate_degenerates_to_uniform() {
        let pop = LossPopulation::Normal { mu: 0.0, sigma: 0.7 };
        let a = analytic_expected_errors(&pop, 1e-9).unwrap();
        assert!((a.e_p - a.e_u).abs() < 1e-15);
    }

    #[test]
    fn normal_grid_orders_u_first() {
        for &s in &[0.1, 0.25, 0.5, 1.0, 1.5, 2.0] {
            for &r in &[0.5, 1.0, 2.0] {
                let pop = LossPopulation::Normal { mu: 0.0, sigma: s };
                let a = analytic_expected_errors(&pop, r).unwrap();
                let gap = a.e_p - a.e_u;
                assert!((gap - r * r * s.powi(4)).abs() <= 1e-15 * a.e_p.max(1.0));
                assert_eq!(ordering_check(&pop, r).unwrap(), Ordering::UBeatsP);
            }
        }
    }

    #[test]
    fn half_normal_diamond_is_tilted_mean_shift() {
        // Oracle: trapezoid quadrature of the tilted half-normal,
        // D = E[y] + rate sigma^2 for density ~ exp(-y^2 / 2 sigma^2 - rate y) on y >= 0.
        let (s, r) = (0.5, 1.0);
        let n = 400_000;
        let h = 12.0 * s / n as f64;
        let (mut z0, mut z1) = (0.0, 0.0);
        for i in 0..=n {
            let y = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let d = w * (-(y * y) / (2.0 * s * s) - r * y).exp();
            z0 += d;
            z1 += d * y;
        }
        let want = z1 / z0 + r * s * s;
        let a = analytic_expected_errors(&LossPopulation::HalfNormal { mu: 0.0, sigma: s }, r).unwrap();
        let d = a.diamond.unwrap();
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
        assert!((d - 0.5705389).abs() < 1e-6);
    }

    #[test]
    fn half_normal_transcribed_values() {
        let a = analytic_expected_errors(&LossPopulation::HalfNormal { mu: 2.0, sigma: 0.5 }, 1.0).unwrap();
        assert!((a.e_u - 0.0908451).abs() < 1e-6);
        assert!((a.e_p - 0.1249588).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        let pop = LossPopulation::Normal { mu: 0.0, sigma: 0.0 };
        assert!(matches!(analytic_expected_errors(&pop, 1.0), Err(Error::InvalidParameter { .. })));
        let pop = LossPopulation::Normal { mu: 0.0, sigma: 1.0 };
        assert!(analytic_expected_errors(&pop, 0.0).is_err());
        assert!(analytic_expected_errors(&pop, -1.0).is_err());
    }
}
