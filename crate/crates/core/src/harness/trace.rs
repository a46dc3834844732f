use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Estimator;
use crate::error::{Error, Result};

/// One estimate for one layer of one seed at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    pub train_error: f64,
    pub test_error: Option<f64>,
    pub estimator: Estimator,
    pub layer: usize,
    pub h_f: f64,
    pub i_x: f64,
    pub i_y: f64,
    pub i_xbar: f64,
}

/// A seed whose training stopped on a non-finite value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub epoch: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    /// Sorted by (seed, epoch, estimator, layer).
    pub rows: Vec<FlowRow>,
    pub failures: Vec<SeedFailure>,
}

impl FlowTrace {
    pub fn push(&mut self, row: FlowRow) {
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn layers(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.rows.iter().map(|r| r.layer).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        let mut e: Vec<Estimator> = self.rows.iter().map(|r| r.estimator).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Rows of one seed/estimator/layer in epoch order.
    pub fn series(&self, seed: u64, estimator: Estimator, layer: usize) -> Vec<&FlowRow> {
        self.rows
            .iter()
            .filter(|r| r.seed == seed && r.estimator == estimator && r.layer == layer)
            .collect()
    }

    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (r.seed, r.epoch, r.estimator, r.layer));
    }
}

pub const TRACE_HEADER: [&str; 11] = [
    "seed",
    "epoch",
    "loss",
    "train_error",
    "test_error",
    "estimator",
    "layer",
    "H_F",
    "I_X",
    "I_Y",
    "I_Xbar",
];

/// UTF-8, header row, LF line endings. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_trace_csv<W: Write>(trace: &FlowTrace, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        out.write_record([
            r.seed.to_string(),
            r.epoch.to_string(),
            r.loss.to_string(),
            r.train_error.to_string(),
            r.test_error.map(|v| v.to_string()).unwrap_or_default(),
            r.estimator.to_string(),
            r.layer.to_string(),
            r.h_f.to_string(),
            r.i_x.to_string(),
            r.i_y.to_string(),
            r.i_xbar.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<FlowTrace> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected trace header {header:?}")));
    }
    let mut trace = FlowTrace::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let f = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {line}: bad number `{}`", &rec[k])))
        };
        let u = |k: usize| -> Result<u64> {
            rec[k]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {line}: bad integer `{}`", &rec[k])))
        };
        trace.rows.push(FlowRow {
            seed: u(0)?,
            epoch: u(1)? as usize,
            loss: f(2)?,
            train_error: f(3)?,
            test_error: if rec[4].is_empty() { None } else { Some(f(4)?) },
            estimator: rec[5].parse()?,
            layer: u(6)? as usize,
            h_f: f(7)?,
            i_x: f(8)?,
            i_y: f(9)?,
            i_xbar: f(10)?,
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    HF,
    IX,
    IY,
    IXbar,
    Loss,
    TrainError,
}

impl Quantity {
    pub const INFORMATION: [Quantity; 3] = [Quantity::IX, Quantity::IY, Quantity::IXbar];

    pub fn of(self, r: &FlowRow) -> f64 {
        match self {
            Quantity::HF => r.h_f,
            Quantity::IX => r.i_x,
            Quantity::IY => r.i_y,
            Quantity::IXbar => r.i_xbar,
            Quantity::Loss => r.loss,
            Quantity::TrainError => r.train_error,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quantity::HF => "H(F)",
            Quantity::IX => "I(X,F)",
            Quantity::IY => "I(Y,F)",
            Quantity::IXbar => "I(Xbar,F)",
            Quantity::Loss => "loss",
            Quantity::TrainError => "train error",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Quantity::HF => "h_f",
            Quantity::IX => "i_x",
            Quantity::IY => "i_y",
            Quantity::IXbar => "i_xbar",
            Quantity::Loss => "loss",
            Quantity::TrainError => "train_error",
        }
    }
}

/// Seed statistics of one quantity at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub seeds: usize,
}

/// Seed mean, min and max of `quantity` for one estimator and layer, in
/// epoch order.
pub fn seed_summary(trace: &FlowTrace, estimator: Estimator, layer: usize, quantity: Quantity) -> Vec<CurvePoint> {
    let mut by_epoch: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in trace.rows.iter().filter(|r| r.estimator == estimator && r.layer == layer) {
        by_epoch.entry(r.epoch).or_default().push(quantity.of(r));
    }
    by_epoch
        .into_iter()
        .map(|(epoch, v)| CurvePoint {
            epoch,
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            seeds: v.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, epoch: usize, layer: usize, i_x: f64) -> FlowRow {
        FlowRow {
            seed,
            epoch,
            loss: 0.1 + epoch as f64,
            train_error: 0.0,
            test_error: if seed == 0 { None } else { Some(0.25) },
            estimator: Estimator::Gibbs,
            layer,
            h_f: 1.0,
            i_x,
            i_y: 0.3,
            i_xbar: i_x - 0.3,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = FlowTrace::default();
        t.push(row(0, 0, 0, 0.1 + 0.2));
        t.push(row(1, 3, 2, 1.0 / 3.0));
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,epoch,loss,train_error,test_error,estimator,layer,H_F,I_X,I_Y,I_Xbar\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_spans_seeds() {
        let mut t = FlowTrace::default();
        t.push(row(0, 1, 0, 1.0));
        t.push(row(1, 1, 0, 3.0));
        t.push(row(1, 2, 0, 2.0));
        let s = seed_summary(&t, Estimator::Gibbs, 0, Quantity::IX);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].mean, s[0].min, s[0].max, s[0].seeds), (2.0, 1.0, 3.0, 2));
        assert_eq!(s[1].seeds, 1);
    }
}
