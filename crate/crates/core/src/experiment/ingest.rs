//! Signal streams stored as CSV: a `t` column followed by one column per
//! node. A node's cells are empty until it joins and numeric afterwards.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::synth::ArrivalSchedule;

/// Samples in time order; `signals[k]` is the sample at time `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalStream {
    pub signals: Vec<Vec<f64>>,
    pub schedule: ArrivalSchedule,
}

impl SignalStream {
    /// Builds a stream and infers its schedule from the sample lengths.
    pub fn from_signals(signals: Vec<Vec<f64>>) -> Result<Self> {
        let first = signals.first().ok_or_else(|| Error::Input("empty signal stream".into()))?;
        let n0 = first.len();
        let mut events = Vec::new();
        for (k, w) in signals.windows(2).enumerate() {
            let (a, b) = (w[0].len(), w[1].len());
            if b < a {
                return Err(Error::Input(format!("sample {} has fewer nodes than its predecessor", k + 2)));
            }
            if b > a {
                events.push((k as u64 + 2, b - a));
            }
        }
        let schedule = ArrivalSchedule::new(n0, signals.len() as u64, events)?;
        Ok(Self { signals, schedule })
    }

    /// Number of nodes arriving with sample `k` (0-based).
    pub fn arrivals_at_index(&self, k: usize) -> usize {
        self.schedule.arrivals_at(k as u64 + 1)
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// Parses a stream. Row order is time order; the `t` column must increase.
pub fn read_stream(r: impl Read) -> Result<SignalStream> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::Format("first column must be `t`".into()));
    }
    let width = header.len() - 1;
    if width == 0 {
        return Err(Error::Format("stream has no node columns".into()));
    }
    let mut signals = Vec::new();
    let mut present = 0usize;
    let mut last_t: Option<f64> = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let t_cell = rec.get(0).unwrap_or("").trim();
        let t: f64 = t_cell.parse().map_err(|_| Error::Format(format!("line {line}: bad time value {t_cell:?}")))?;
        if last_t.is_some_and(|p| t <= p) {
            return Err(Error::Format(format!("line {line}: time values must increase")));
        }
        last_t = Some(t);
        let mut x = Vec::with_capacity(width);
        let mut gap = false;
        for (k, cell) in rec.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                if k < present {
                    return Err(Error::Format(format!("line {line}: node_{k} becomes empty after having joined")));
                }
                gap = true;
                continue;
            }
            if gap {
                return Err(Error::Format(format!(
                    "line {line}: node_{k} is present while an earlier column is empty; nodes must join in column order"
                )));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: non-numeric cell {cell:?} in node_{k}")))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("line {line}: non-finite value in node_{k}")));
            }
            x.push(v);
        }
        if x.is_empty() {
            return Err(Error::Format(format!("line {line}: no node is present")));
        }
        present = x.len();
        signals.push(x);
    }
    if signals.is_empty() {
        return Err(Error::Format("stream has no rows".into()));
    }
    SignalStream::from_signals(signals).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_stream_path(path: &Path) -> Result<SignalStream> {
    let f = std::fs::File::open(path)?;
    read_stream(std::io::BufReader::new(f))
}

/// Writes `signals` with empty cells for nodes that have not joined yet.
pub fn write_stream(signals: &[Vec<f64>], w: impl Write) -> Result<()> {
    let width = signals.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..width).map(|k| format!("node_{k}")));
    out.write_record(&header)?;
    for (k, x) in signals.iter().enumerate() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        row.resize(width + 1, String::new());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Replaces every value by its z-score against the running mean and standard
/// deviation of that node's history up to and including the current value.
/// The first observation of each node, and any value with zero spread so
/// far, maps to 0.
pub fn standardize(stream: &mut SignalStream) {
    let mut count: Vec<f64> = Vec::new();
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for x in &mut stream.signals {
        count.resize(x.len(), 0.0);
        mean.resize(x.len(), 0.0);
        m2.resize(x.len(), 0.0);
        for (k, v) in x.iter_mut().enumerate() {
            count[k] += 1.0;
            let d = *v - mean[k];
            mean[k] += d / count[k];
            m2[k] += d * (*v - mean[k]);
            let sd = if count[k] > 1.0 { (m2[k] / (count[k] - 1.0)).sqrt() } else { 0.0 };
            *v = if sd > 0.0 { (*v - mean[k]) / sd } else { 0.0 };
        }
    }
}
