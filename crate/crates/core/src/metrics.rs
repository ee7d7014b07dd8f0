//! Tracking errors, regret series and the dynamic-regret bound.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::matops::{frob_dist, zero_pad, SymMatrix};

/// `‖s_hat - s_ref‖²_F / ‖s_ref‖²_F`.
pub fn nerr(s_hat: &SymMatrix, s_ref: &SymMatrix) -> Result<f64> {
    let denom = s_ref.frobenius_norm().powi(2);
    if denom == 0.0 {
        return Err(Error::Domain("normalized error against a zero reference".into()));
    }
    Ok(frob_dist(s_hat, s_ref)?.powi(2) / denom)
}

/// Running means of `errs`.
pub fn avg_cum_regret(errs: &[f64]) -> Result<Vec<f64>> {
    if errs.is_empty() {
        return Err(Error::Input("regret of an empty error sequence".into()));
    }
    let mut sum = 0.0;
    Ok(errs
        .iter()
        .enumerate()
        .map(|(k, e)| {
            sum += e;
            sum / (k + 1) as f64
        })
        .collect())
}

/// Path length of a sequence of optima: `Σ ‖S_t - pad(S_{t-1})‖_F`.
pub fn path_length(opt_seq: &[SymMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for w in opt_seq.windows(2) {
        total += step_drift(&w[0], &w[1])?;
    }
    Ok(total)
}

/// One term of [`path_length`].
pub fn step_drift(prev: &SymMatrix, cur: &SymMatrix) -> Result<f64> {
    if cur.n() < prev.n() {
        return Err(Error::Dimension(format!("sequence shrinks from side {} to {}", prev.n(), cur.n())));
    }
    frob_dist(cur, &zero_pad(prev, cur.n())?)
}

/// `sqrt(1 - h eta / sigma)`.
pub fn contraction_rho(h: f64, eta: f64, sigma: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(param_err(format!("h must lie in (0, 1], got {h}")));
    }
    let r = h * eta / sigma;
    if !(r > 0.0 && r <= 1.0) {
        return Err(param_err(format!("h * eta / sigma must lie in (0, 1], got {r}")));
    }
    Ok((1.0 - r).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    pub rho: f64,
    pub k1: f64,
    pub k2: f64,
    pub path_length: f64,
    pub bound: f64,
}

/// `K1 + K2 * path_len` with `K1 = (err_first - rho err_last) / (1 - rho)` and
/// `K2 = 1 / (1 - rho)`.
pub fn regret_bound(err_first: f64, err_last: f64, rho: f64, path_len: f64) -> Result<f64> {
    Ok(regret_bound_parts(err_first, err_last, rho, path_len)?.bound)
}

pub fn regret_bound_parts(err_first: f64, err_last: f64, rho: f64, path_len: f64) -> Result<RegretBound> {
    if !(0.0..1.0).contains(&rho) {
        return Err(param_err(format!("rho must lie in [0, 1), got {rho}")));
    }
    let k1 = (err_first - rho * err_last) / (1.0 - rho);
    let k2 = 1.0 / (1.0 - rho);
    Ok(RegretBound { rho, k1, k2, path_length: path_len, bound: k1 + k2 * path_len })
}

/// Per-arrival drift bound `sqrt(2 d_max |I_t|)` for unit-weight edges.
pub fn path_length_arrival_bound(d_max: usize, n_incoming: usize) -> f64 {
    (2.0 * d_max as f64 * n_incoming as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretRecord {
    pub t: u64,
    pub n_t: usize,
    pub nerr_offline: Option<f64>,
    pub nerr_truth: Option<f64>,
    /// Running mean of `nerr_offline` over the steps where it was measured.
    pub avg_cum_regret: Option<f64>,
    /// Running sum of `‖Ŝ_t - S*_t‖_F` over the same steps.
    pub frob_regret: Option<f64>,
    pub wall_ms: Option<f64>,
}

pub const LOG_HEADER: [&str; 7] =
    ["t", "n_t", "nerr_offline", "nerr_truth", "avg_cum_regret", "frob_regret", "wall_ms"];

/// Per-step errors of one estimator run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretLog {
    records: Vec<RegretRecord>,
    offline_sum: f64,
    offline_count: usize,
    frob_sum: f64,
}

impl RegretLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[RegretRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a step. `offline` holds `(nerr, frobenius distance)` against the
    /// offline optimum when it was computed.
    pub fn push(
        &mut self,
        t: u64,
        n_t: usize,
        offline: Option<(f64, f64)>,
        nerr_truth: Option<f64>,
        wall_ms: Option<f64>,
    ) -> Result<()> {
        if let Some(last) = self.records.last() {
            if t <= last.t || n_t < last.n_t {
                return Err(Error::Input(format!(
                    "log rows must advance: t {} -> {t}, n_t {} -> {n_t}",
                    last.t, last.n_t
                )));
            }
        }
        let vals = [offline.map(|o| o.0), offline.map(|o| o.1), nerr_truth, wall_ms];
        if vals.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::Input(format!("negative or NaN error at t = {t}")));
        }
        let (avg, frob) = match offline {
            Some((e, d)) => {
                self.offline_sum += e;
                self.offline_count += 1;
                self.frob_sum += d;
                (Some(self.offline_sum / self.offline_count as f64), Some(self.frob_sum))
            }
            None => (None, None),
        };
        self.records.push(RegretRecord {
            t,
            n_t,
            nerr_offline: offline.map(|o| o.0),
            nerr_truth,
            avg_cum_regret: avg,
            frob_regret: frob,
            wall_ms,
        });
        Ok(())
    }

    /// Series of `(t, value)` for a named column, skipping absent values.
    pub fn series(&self, metric: Metric) -> Vec<(u64, f64)> {
        self.records.iter().filter_map(|r| metric.get(r).map(|v| (r.t, v))).collect()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LOG_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.n_t.to_string(),
                opt(r.nerr_offline),
                opt(r.nerr_truth),
                opt(r.avg_cum_regret),
                opt(r.frob_regret),
                opt(r.wall_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a log written by [`write_csv`](Self::write_csv).
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != LOG_HEADER {
            return Err(Error::Format(format!("unexpected regret log header {header:?}")));
        }
        let mut log = Self::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let field = |k: usize| -> Result<Option<f64>> {
                let s = rec.get(k).unwrap_or("");
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Format(format!("line {line}: bad number {s:?}")))
            };
            let int = |k: usize| -> Result<u64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format(format!("line {line}: bad integer in column {}", LOG_HEADER[k])))
            };
            let r = RegretRecord {
                t: int(0)?,
                n_t: int(1)? as usize,
                nerr_offline: field(2)?,
                nerr_truth: field(3)?,
                avg_cum_regret: field(4)?,
                frob_regret: field(5)?,
                wall_ms: field(6)?,
            };
            if let (Some(e), Some(acc)) = (r.nerr_offline, r.frob_regret) {
                log.offline_count += 1;
                log.offline_sum += e;
                log.frob_sum = acc;
            }
            log.records.push(r);
        }
        Ok(log)
    }
}

/// Columns of [`RegretLog`] that are aggregated across realizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NerrOffline,
    NerrTruth,
    AvgCumRegret,
    FrobRegret,
    WallMs,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::NerrOffline, Metric::NerrTruth, Metric::AvgCumRegret, Metric::FrobRegret, Metric::WallMs];

    pub fn name(self) -> &'static str {
        match self {
            Metric::NerrOffline => "nerr_offline",
            Metric::NerrTruth => "nerr_truth",
            Metric::AvgCumRegret => "avg_cum_regret",
            Metric::FrobRegret => "frob_regret",
            Metric::WallMs => "wall_ms",
        }
    }

    pub fn get(self, r: &RegretRecord) -> Option<f64> {
        match self {
            Metric::NerrOffline => r.nerr_offline,
            Metric::NerrTruth => r.nerr_truth,
            Metric::AvgCumRegret => r.avg_cum_regret,
            Metric::FrobRegret => r.frob_regret,
            Metric::WallMs => r.wall_ms,
        }
    }
}

/// Linear-interpolation percentile of `sorted` (ascending), `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Median of unsorted values; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}
