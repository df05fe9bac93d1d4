use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve from the rank statistic, ties counted half.
/// Returns 0.5 when only one class is present.
pub fn auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&k| positive[k]).count() as f64 * mid_rank;
        i = j + 1;
    }
    let np = n_pos as f64;
    (rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64)
}

pub fn accuracy(predicted: &[usize], actual: &[usize]) -> f64 {
    if actual.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    hits as f64 / actual.len() as f64
}

/// Interior peaks after merging runs of equal values.
pub fn local_maxima<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut runs: Vec<T> = Vec::with_capacity(xs.len());
    for &x in xs {
        if runs.last() != Some(&x) {
            runs.push(x);
        }
    }
    runs.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

/// `R[i][j]`: metric on distribution `j` after learning distributions `0..=i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    /// Metric of an untrained model on each distribution.
    pub baseline: Vec<f64>,
}

impl TransferMatrix {
    pub fn new(r: Vec<Vec<f64>>, baseline: Vec<f64>) -> Result<Self> {
        let k = r.len();
        if r.iter().any(|row| row.len() != k) || baseline.len() != k {
            return Err(Error::Shape(format!("transfer matrix must be square with {k} baseline entries")));
        }
        Ok(Self { r, baseline })
    }

    pub fn size(&self) -> usize {
        self.r.len()
    }

    /// Mean over `i < K` of `R[K][i] - R[i][i]`.
    pub fn bwt(&self) -> Result<f64> {
        let k = self.size();
        if k < 2 {
            return Err(Error::TooFewDistributions(k));
        }
        let last = &self.r[k - 1];
        Ok((0..k - 1).map(|i| last[i] - self.r[i][i]).sum::<f64>() / (k - 1) as f64)
    }

    /// Mean over `i >= 1` of `R[i-1][i] - baseline[i]`.
    pub fn fwt(&self) -> Result<f64> {
        let k = self.size();
        if k < 2 {
            return Err(Error::TooFewDistributions(k));
        }
        Ok((1..k).map(|i| self.r[i - 1][i] - self.baseline[i]).sum::<f64>() / (k - 1) as f64)
    }

    /// `{R, baseline, bwt, fwt}`; the metrics are `null` below two stages.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(rename = "R")]
            r: &'a [Vec<f64>],
            baseline: &'a [f64],
            bwt: Option<f64>,
            fwt: Option<f64>,
        }
        Ok(serde_json::to_string_pretty(&Out {
            r: &self.r,
            baseline: &self.baseline,
            bwt: self.bwt().ok(),
            fwt: self.fwt().ok(),
        })?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub seed: u64,
    pub epoch: usize,
    pub split: String,
    pub metric_name: String,
    pub value: f64,
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pairwise-comparison oracle for AUC.
    fn auc_pairs(s: &[f64], p: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if p[i] && !p[j] {
                    den += 1.0;
                    num += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pair_count() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.4, 0.2, 0.9];
        let p = [false, true, false, true, false, false, true];
        assert!((auc(&s, &p) - auc_pairs(&s, &p)).abs() < 1e-15);
        assert_eq!(auc(&[1.0, 2.0], &[false, true]), 1.0);
        assert_eq!(auc(&[1.0, 1.0], &[false, true]), 0.5);
        assert_eq!(auc(&[1.0, 2.0], &[true, true]), 0.5);
    }

    #[test]
    fn peaks() {
        assert_eq!(local_maxima(&[1, 3, 2, 2, 4, 4, 1, 5]), 2);
        assert_eq!(local_maxima(&[1, 2, 3]), 0);
        assert_eq!(local_maxima::<i32>(&[]), 0);
    }

    fn square(k: usize, v: f64) -> TransferMatrix {
        TransferMatrix::new(vec![vec![v; k]; k], vec![v; k]).unwrap()
    }

    #[test]
    fn equal_entries_zero_transfer() {
        let m = square(4, 0.7);
        assert_eq!(m.bwt().unwrap(), 0.0);
        assert_eq!(m.fwt().unwrap(), 0.0);
    }

    #[test]
    fn bwt_constant_shift() {
        let mut m = square(3, 0.5);
        m.r[0][0] = 0.4;
        m.r[1][1] = 0.6;
        m.r[2][0] = 0.5;
        m.r[2][1] = 0.7;
        assert!((m.bwt().unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fwt_constant_difference() {
        let mut m = square(3, 0.5);
        m.r[0][1] = 0.7;
        m.r[1][2] = 0.7;
        assert!((m.fwt().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn random_instance_matches_direct_sum() {
        let r = vec![vec![0.61, 0.52, 0.33], vec![0.44, 0.75, 0.58], vec![0.39, 0.71, 0.86]];
        let b = vec![0.5, 0.49, 0.51];
        let m = TransferMatrix::new(r, b).unwrap();
        let bwt = ((0.39 - 0.61) + (0.71 - 0.75)) / 2.0;
        let fwt = ((0.52 - 0.49) + (0.58 - 0.51)) / 2.0;
        assert!((m.bwt().unwrap() - bwt).abs() < 1e-15);
        assert!((m.fwt().unwrap() - fwt).abs() < 1e-15);
    }

    #[test]
    fn single_stage_has_no_transfer() {
        let m = square(1, 0.5);
        assert!(matches!(m.bwt(), Err(Error::TooFewDistributions(1))));
        assert!(m.fwt().is_err());
        assert!(m.to_json().unwrap().contains("\"bwt\": null"));
        assert!(TransferMatrix::new(vec![vec![0.0; 2]], vec![0.0]).is_err());
    }
}
