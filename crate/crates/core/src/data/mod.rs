//! Time-series samples, synthetic generators, CSV ingestion and prefix views.

mod csvio;
mod generate;

pub use csvio::{load_csv, load_csv_lenient, write_csv, CsvSchema, LabelKind, RowDiagnostic};
pub use generate::{gen_drift_classification, gen_sine_regression, DriftConfig, SineConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Class(usize),
    Real(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Real(_) => None,
        }
    }

    pub fn real(&self) -> Option<f64> {
        match *self {
            Label::Real(y) => Some(y),
            Label::Class(_) => None,
        }
    }
}

/// One series `x_1..x_T`, stored time-major: `values[t * dims + d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSample {
    pub id: u64,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

/// Equal-length series with a shared dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    length: usize,
    dims: usize,
    samples: Vec<TimeSeriesSample>,
    /// Ids whose labels were flipped by a generator's label noise.
    pub flipped: Vec<u64>,
}

impl Dataset {
    pub fn new(length: usize, dims: usize, samples: Vec<TimeSeriesSample>) -> Result<Self> {
        if length < 2 {
            return Err(Error::invalid("length", "series need at least two observations"));
        }
        if dims == 0 {
            return Err(Error::invalid("dims", "must be positive"));
        }
        for s in &samples {
            if s.values.len() != length * dims {
                return Err(Error::Shape(format!(
                    "sample {} has {} values, expected {}",
                    s.id,
                    s.values.len(),
                    length * dims
                )));
            }
            if let Some(i) = s.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i, value: s.values[i] });
            }
        }
        Ok(Self { length, dims, samples, flipped: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Observations per series, `T`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn samples(&self) -> &[TimeSeriesSample] {
        &self.samples
    }

    /// The first `k` samples and the rest.
    pub fn split_at(&self, k: usize) -> (Dataset, Dataset) {
        let k = k.min(self.len());
        let part = |s: &[TimeSeriesSample]| Dataset {
            length: self.length,
            dims: self.dims,
            samples: s.to_vec(),
            flipped: self.flipped.iter().copied().filter(|id| s.iter().any(|x| x.id == *id)).collect(),
        };
        (part(&self.samples[..k]), part(&self.samples[k..]))
    }

    /// The whole series viewed as a prefix of length `T`.
    pub fn full(&self) -> PrefixDataset<'_> {
        PrefixDataset { source: self, t: self.length }
    }
}

/// The first `t` observations of every sample in `source`.
#[derive(Debug, Clone, Copy)]
pub struct PrefixDataset<'a> {
    source: &'a Dataset,
    t: usize,
}

impl<'a> PrefixDataset<'a> {
    pub fn source(&self) -> &'a Dataset {
        self.source
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.source.dims
    }

    /// `X_{i, 1:t}`, time-major.
    pub fn values(&self, i: usize) -> &'a [f64] {
        &self.source.samples[i].values[..self.t * self.source.dims]
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.source.samples[i].label
    }

    pub fn id(&self, i: usize) -> u64 {
        self.source.samples[i].id
    }

    /// The last `window` time steps of sample `i`, left-padded with zeros
    /// when the prefix is shorter.
    pub fn window(&self, i: usize, window: usize, out: &mut Vec<f64>) {
        let d = self.source.dims;
        let v = self.values(i);
        out.clear();
        let pad = window.saturating_sub(self.t);
        out.resize(pad * d, 0.0);
        let start = self.t.saturating_sub(window);
        out.extend_from_slice(&v[start * d..]);
    }
}

/// Nested prefix views at strictly increasing cut points.
pub fn make_prefixes<'a>(data: &'a Dataset, cuts: &[usize]) -> Result<Vec<PrefixDataset<'a>>> {
    if cuts.is_empty() {
        return Err(Error::Empty("cut list"));
    }
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("cuts", "must be strictly increasing"));
    }
    if cuts[0] == 0 {
        return Err(Error::invalid("cuts", "prefix length must be at least 1"));
    }
    let last = cuts[cuts.len() - 1];
    if last > data.length {
        return Err(Error::invalid("cuts", format!("cut {last} exceeds series length {}", data.length)));
    }
    Ok(cuts.iter().map(|&t| PrefixDataset { source: data, t }).collect())
}

/// `k` cut points spread evenly over `1..=T`, ending at `T`.
pub fn even_cuts(length: usize, k: usize) -> Vec<usize> {
    (1..=k).map(|i| (i * length).div_ceil(k)).collect()
}
