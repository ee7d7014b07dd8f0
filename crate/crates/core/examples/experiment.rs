//! Configuration-driven comparison of the four estimators over a few
//! realizations, writing logs, an aggregate table and a manifest.
//!
//! Run: cargo run --release --example experiment -- /tmp/expgraph_run

use std::path::PathBuf;

use expanding_graph::experiment::aggregate::median_series;
use expanding_graph::experiment::{run_experiment, ExperimentConfig};
use expanding_graph::metrics::Metric;

const CONFIG: &str = r#"{
    "mode": "synth",
    "n0": 20, "horizon": 400, "arrivals": [[150, 4], [300, 4]],
    "avg_degree": 3.0, "delta": 0.2, "epsilon": 1.0, "sigma": 100.0, "lambda": 0.02,
    "gamma": 0.99, "iters_per_step": 2, "realizations": 4, "oracle_every": 20
}"#;

fn main() -> expanding_graph::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("expgraph_run"));
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let summary = run_experiment(&cfg, &out, 0)?;
    let rows = expanding_graph::experiment::read_aggregate(std::fs::File::open(out.join("aggregate.csv"))?)?;
    for spec in &summary.estimators {
        let s = median_series(&rows, &spec.label, Metric::NerrTruth);
        if let Some((t, v)) = s.last() {
            println!("{:<10} median nerr_truth at t = {t}: {v:.4}", spec.label);
        }
    }
    println!("results in {}", out.display());
    Ok(())
}
