use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population statistics of one epoch's per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std_dev: f64,
    /// Third standardized central moment; 0 when `std_dev` is 0.
    pub skewness: f64,
    pub count: usize,
}

/// Mean, population standard deviation and skewness of `losses`.
///
/// Two passes in index order, so identical input always gives bit-identical
/// output.
pub fn loss_stats(losses: &[f64]) -> Result<LossStats> {
    if losses.is_empty() {
        return Err(Error::Empty("loss list"));
    }
    if let Some((index, &value)) = losses.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let (m2, m3) = losses.iter().fold((0.0, 0.0), |(m2, m3), &l| {
        let d = l - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let var = m2 / n;
    let std_dev = var.sqrt();
    let skewness = if std_dev > 0.0 { (m3 / n) / (var * std_dev) } else { 0.0 };
    Ok(LossStats { mean, std_dev, skewness, count: losses.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct moment oracle written independently of the fold above.
    fn brute_skew(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mu: f64 = xs.iter().sum::<f64>() / n;
        let m = |p: i32| xs.iter().map(|x| (x - mu).powi(p)).sum::<f64>() / n;
        m(3) / m(2).powf(1.5)
    }

    #[test]
    fn symmetric_is_zero() {
        let s = loss_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.count, 3);
    }

    #[test]
    fn one_outlier() {
        let xs = [0.0, 0.0, 0.0, 1.0];
        let s = loss_stats(&xs).unwrap();
        let want = brute_skew(&xs);
        assert!((want - 1.1547005).abs() < 1e-7);
        assert!((s.skewness - want).abs() < 1e-14);
        assert!((s.std_dev - 0.4330127018922193).abs() < 1e-15);
    }

    #[test]
    fn degenerate_single_value() {
        let s = loss_stats(&[5.0]).unwrap();
        assert_eq!((s.mean, s.std_dev, s.skewness), (5.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(loss_stats(&[]), Err(Error::Empty(_))));
        assert!(matches!(loss_stats(&[1.0, f64::NAN]), Err(Error::NonFinite { index: 1, .. })));
    }

    proptest! {
        #[test]
        fn skewness_is_shift_and_scale_invariant(
            xs in prop::collection::vec(0.0f64..10.0, 3..64),
            shift in -100.0f64..100.0,
            scale in 0.01f64..100.0,
        ) {
            let base = loss_stats(&xs).unwrap();
            prop_assume!(base.std_dev > 1e-3);
            let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            let s = loss_stats(&moved).unwrap();
            let tol = 1e-9 * base.skewness.abs().max(1.0);
            prop_assert!((s.skewness - base.skewness).abs() <= tol);
        }

        #[test]
        fn recomputation_is_bit_identical(xs in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            prop_assert_eq!(loss_stats(&xs).unwrap(), loss_stats(&xs).unwrap());
        }
    }
}
