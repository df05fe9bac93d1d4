use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Label, TimeSeriesSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    /// Non-negative integer class.
    #[default]
    Class,
    /// Real-valued regression target.
    Real,
}

/// What a CSV file is expected to contain. `None` fields are inferred from
/// the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvSchema {
    pub label: LabelKind,
    pub length: Option<usize>,
    pub dims: Option<usize>,
}

/// A rejected data row. `row` is the 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    pub row: u64,
    pub reason: String,
}

fn header_names(length: usize, dims: usize) -> Vec<String> {
    let mut h = vec!["id".to_string(), "label".to_string()];
    for t in 1..=length {
        if dims == 1 {
            h.push(format!("v{t}"));
        } else {
            for d in 1..=dims {
                h.push(format!("v{t}_d{d}"));
            }
        }
    }
    h
}

/// Reads `(length, dims)` from a header, or explains why it does not fit.
fn parse_header(fields: &[&str]) -> std::result::Result<(usize, usize), String> {
    if fields.len() < 2 || fields[0] != "id" || fields[1] != "label" {
        return Err("first columns must be `id,label`".into());
    }
    let cols = &fields[2..];
    let dims = if cols.first().is_some_and(|c| c.contains("_d")) {
        cols.iter().take_while(|c| c.starts_with("v1_d")).count()
    } else {
        1
    };
    if dims == 0 || !cols.len().is_multiple_of(dims) {
        return Err("value columns do not form whole time steps".into());
    }
    let length = cols.len() / dims;
    if length < 2 {
        return Err(format!("need at least two time steps, found {length}"));
    }
    let want = header_names(length, dims);
    if let Some(i) = (0..cols.len()).find(|&i| cols[i] != want[i + 2]) {
        return Err(format!("column {} is `{}`, expected `{}`", i + 3, cols[i], want[i + 2]));
    }
    Ok((length, dims))
}

fn parse_row(
    record: &csv::StringRecord,
    width: usize,
    label_kind: LabelKind,
) -> std::result::Result<TimeSeriesSample, String> {
    if record.len() != width {
        return Err(format!("expected {width} fields, found {}", record.len()));
    }
    let id: u64 = record[0].trim().parse().map_err(|_| format!("id `{}` is not a non-negative integer", &record[0]))?;
    let raw_label = record[1].trim();
    let label = if raw_label.is_empty() {
        None
    } else {
        Some(match label_kind {
            LabelKind::Class => {
                Label::Class(raw_label.parse().map_err(|_| format!("label `{raw_label}` is not a class index"))?)
            }
            LabelKind::Real => {
                let y: f64 = raw_label.parse().map_err(|_| format!("label `{raw_label}` is not a number"))?;
                if !y.is_finite() {
                    return Err(format!("label `{raw_label}` is not finite"));
                }
                Label::Real(y)
            }
        })
    };
    let mut values = Vec::with_capacity(width - 2);
    for (k, cell) in record.iter().enumerate().skip(2) {
        let cell = cell.trim();
        if cell.is_empty() {
            return Err(format!("missing value in column {}", k + 1));
        }
        let v: f64 = cell.parse().map_err(|_| format!("`{cell}` in column {} is not a number", k + 1))?;
        if !v.is_finite() {
            return Err(format!("non-finite value `{cell}` in column {}", k + 1));
        }
        values.push(v);
    }
    Ok(TimeSeriesSample { id, values, label })
}

/// Loads every well-formed row and reports each rejected one.
///
/// A header that does not match the `id,label,v1..vT` (or `v{t}_d{j}`)
/// layout, or disagrees with `schema`, is a hard error.
pub fn load_csv_lenient(path: &Path, schema: &CsvSchema) -> Result<(Dataset, Vec<RowDiagnostic>)> {
    let header_err = |reason: String| Error::Header { path: path.to_path_buf(), reason };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    let (length, dims) = parse_header(&fields).map_err(header_err)?;
    if let Some(want) = schema.length.filter(|&w| w != length) {
        return Err(header_err(format!("expected {want} time steps, header has {length}")));
    }
    if let Some(want) = schema.dims.filter(|&w| w != dims) {
        return Err(header_err(format!("expected {want} dimensions, header has {dims}")));
    }

    let width = fields.len();
    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        match parse_row(&record, width, schema.label) {
            Ok(s) => samples.push(s),
            Err(reason) => rejected.push(RowDiagnostic { row, reason }),
        }
    }
    Ok((Dataset::new(length, dims, samples)?, rejected))
}

/// Like [`load_csv_lenient`] but fails if any row is malformed.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let (data, rejected) = load_csv_lenient(path, schema)?;
    if rejected.is_empty() {
        Ok(data)
    } else {
        Err(Error::MalformedRows { path: path.to_path_buf(), rows: rejected })
    }
}

/// Writes `data` in the layout [`load_csv`] reads. Values use the shortest
/// round-trip decimal form, so writing and reloading is lossless.
pub fn write_csv<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header_names(data.length(), data.dims()))?;
    let mut row: Vec<String> = Vec::new();
    for s in data.samples() {
        row.clear();
        row.push(s.id.to_string());
        row.push(match s.label {
            None => String::new(),
            Some(Label::Class(c)) => c.to_string(),
            Some(Label::Real(y)) => y.to_string(),
        });
        row.extend(s.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
