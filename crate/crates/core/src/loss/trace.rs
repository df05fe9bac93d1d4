use std::io::Write;

use serde::Serialize;

use super::ModulatedLoss;
use crate::error::Result;

/// One row of a loss trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub sample_id: u64,
    pub input_loss: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub value: f64,
    pub selected: bool,
}

impl TraceRow {
    pub fn new(epoch: usize, sample_id: u64, m: &ModulatedLoss) -> Self {
        Self {
            epoch,
            sample_id,
            input_loss: m.input_loss,
            kappa: m.kappa,
            threshold: m.threshold,
            value: m.value,
            selected: m.selected,
        }
    }
}

/// Writes `rows` as CSV with header
/// `epoch,sample_id,input_loss,kappa,threshold,value,selected`.
pub fn write_loss_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::baseline_confidence_loss;

    #[test]
    fn header_and_rows() {
        let m = baseline_confidence_loss(0.5, 0.5, 0.01).unwrap();
        let mut buf = Vec::new();
        write_loss_trace(&mut buf, &[TraceRow::new(3, 7, &m)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("epoch,sample_id,input_loss,kappa,threshold,value,selected"));
        assert_eq!(lines.next(), Some("3,7,0.5,1.0,0.5,0.0,true"));
    }
}
