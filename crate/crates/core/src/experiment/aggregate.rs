use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::{percentile, Metric, RegretLog};

pub const AGGREGATE_HEADER: [&str; 6] = ["t", "estimator", "metric", "median", "p25", "p75"];

/// Cross-realization summary of one metric at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub estimator: String,
    pub metric: Metric,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Realizations that contributed a value.
    pub count: usize,
}

/// Median and quartiles per `(t, estimator, metric)` over the realizations
/// that recorded a value. `logs[k]` holds the realizations of `labels[k]`.
/// Rows are ordered by time, then estimator, then metric.
pub fn aggregate(labels: &[String], logs: &[Vec<&RegretLog>]) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(u64, usize, Metric), Vec<f64>> = BTreeMap::new();
    for (k, runs) in logs.iter().enumerate() {
        for log in runs {
            for r in log.records() {
                for m in Metric::ALL {
                    if let Some(v) = m.get(r) {
                        cells.entry((r.t, k, m)).or_default().push(v);
                    }
                }
            }
        }
    }
    cells
        .into_iter()
        .map(|((t, k, metric), mut v)| {
            v.sort_by(f64::total_cmp);
            AggregateRow {
                t,
                estimator: labels[k].clone(),
                metric,
                median: percentile(&v, 0.5),
                p25: percentile(&v, 0.25),
                p75: percentile(&v, 0.75),
                count: v.len(),
            }
        })
        .collect()
}

pub fn write_aggregate(rows: &[AggregateRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        out.write_record([
            r.t.to_string(),
            r.estimator.clone(),
            r.metric.name().to_string(),
            r.median.to_string(),
            r.p25.to_string(),
            r.p75.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an aggregate table; `count` is not stored and comes back as 0.
pub fn read_aggregate(r: impl Read) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(AGGREGATE_HEADER) {
        return Err(Error::Format("unexpected aggregate header".into()));
    }
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Format(format!("aggregate line {}", row + 2));
        let num = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        let metric = Metric::ALL.into_iter().find(|m| Some(m.name()) == rec.get(2)).ok_or_else(bad)?;
        rows.push(AggregateRow {
            t: rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?,
            estimator: rec.get(1).ok_or_else(bad)?.to_string(),
            metric,
            median: num(3)?,
            p25: num(4)?,
            p75: num(5)?,
            count: 0,
        });
    }
    Ok(rows)
}

/// Medians of one metric for one estimator as `(t, median)` pairs.
pub fn median_series(rows: &[AggregateRow], estimator: &str, metric: Metric) -> Vec<(u64, f64)> {
    rows.iter().filter(|r| r.estimator == estimator && r.metric == metric).map(|r| (r.t, r.median)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(values: &[(u64, f64)]) -> RegretLog {
        let mut l = RegretLog::new();
        for &(t, v) in values {
            l.push(t, 3, None, Some(v), None).unwrap();
        }
        l
    }

    #[test]
    fn single_realization_is_passed_through() {
        let a = log(&[(1, 0.5), (2, 0.25)]);
        let rows = aggregate(&["x".to_string()], &[vec![&a]]);
        assert_eq!(rows.len(), 2);
        for (r, v) in rows.iter().zip([0.5, 0.25]) {
            assert_eq!((r.median, r.p25, r.p75), (v, v, v));
            assert_eq!(r.metric, Metric::NerrTruth);
        }
    }

    #[test]
    fn quartiles_over_realizations() {
        let logs: Vec<RegretLog> = [4.0, 1.0, 3.0, 2.0, 5.0].iter().map(|&v| log(&[(1, v)])).collect();
        let rows = aggregate(&["x".to_string()], &[logs.iter().collect()]);
        assert_eq!((rows[0].median, rows[0].p25, rows[0].p75, rows[0].count), (3.0, 2.0, 4.0, 5));
    }

    #[test]
    fn rows_sorted_and_round_trip() {
        let a = log(&[(1, 0.5), (3, 0.1)]);
        let b = log(&[(2, 0.7)]);
        let labels = vec!["a".to_string(), "b".to_string()];
        let rows = aggregate(&labels, &[vec![&a], vec![&b]]);
        let order: Vec<(u64, &str)> = rows.iter().map(|r| (r.t, r.estimator.as_str())).collect();
        assert_eq!(order, vec![(1, "a"), (2, "b"), (3, "a")]);
        let mut buf = Vec::new();
        write_aggregate(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("t,estimator,metric,median,p25,p75\n1,a,nerr_truth,0.5,"));
        let back = read_aggregate(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(median_series(&back, "a", Metric::NerrTruth), vec![(1, 0.5), (3, 0.1)]);
    }
}
