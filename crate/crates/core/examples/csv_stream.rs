//! Reads a recorded stream from CSV, standardizes it and runs the online
//! learner on it. With no argument a small stream is generated first.
//!
//! Run: cargo run --release --example csv_stream -- path/to/stream.csv

use std::path::PathBuf;

use expanding_graph::covariance::CovarianceModel;
use expanding_graph::experiment::ingest::{read_stream_path, standardize};
use expanding_graph::experiment::write_stream;
use expanding_graph::synth::{build_scenario, ArrivalSchedule, ScenarioSpec};
use expanding_graph::{Gmrf, GmrfParams, OnlineLearner, OnlineOptions};

fn main() -> expanding_graph::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let spec = ScenarioSpec {
                schedule: ArrivalSchedule::new(8, 200, vec![(120, 2)])?,
                avg_degree: 2.0,
                delta: 0.5,
                rewire_every: None,
            };
            let p = std::env::temp_dir().join("expgraph_stream.csv");
            write_stream(&build_scenario(&spec, 1)?.signals, std::fs::File::create(&p)?)?;
            p
        }
    };
    let mut stream = read_stream_path(&path)?;
    standardize(&mut stream);
    println!(
        "{} samples, {} nodes at the start, arrivals {:?}",
        stream.len(),
        stream.schedule.n0,
        stream.schedule.events
    );

    let params = GmrfParams::new(1.0, 100.0, 0.0, 0.05)?;
    let opts = OnlineOptions::new(params.eta_max(), 1.0, 2)?;
    let cov = CovarianceModel::expanding(stream.schedule.n0, 0.98)?;
    let mut learner = OnlineLearner::new(Gmrf::new(params)?, cov, opts)?;
    for (k, x) in stream.signals.iter().enumerate() {
        learner.step(x, stream.arrivals_at_index(k))?;
    }
    let s = learner.estimate();
    let edges =
        (0..s.n()).flat_map(|i| (i + 1..s.n()).map(move |j| (i, j))).filter(|&(i, j)| s.get(i, j) != 0.0).count();
    println!("final estimate: {} nodes, {edges} nonzero off-diagonal pairs", s.n());
    Ok(())
}
