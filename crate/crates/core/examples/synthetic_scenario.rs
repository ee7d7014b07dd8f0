//! Builds a synthetic expanding graph scenario and writes its ground truth
//! and signal stream to a directory.
//!
//! Run: cargo run --release --example synthetic_scenario -- /tmp/scenario

use std::fs::File;
use std::path::PathBuf;

use expanding_graph::experiment::write_stream;
use expanding_graph::synth::{build_scenario, degrees, write_scenario, ArrivalSchedule, ScenarioSpec};

fn main() -> expanding_graph::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("scenario"));
    std::fs::create_dir_all(&dir)?;
    let spec = ScenarioSpec {
        schedule: ArrivalSchedule::new(20, 300, vec![(100, 4), (200, 6)])?,
        avg_degree: 4.0,
        delta: 0.1,
        rewire_every: Some(50),
    };
    let sc = build_scenario(&spec, 5)?;
    for seg in &sc.segments {
        let d = degrees(&seg.adjacency);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        println!("from t = {:>3}: {} nodes, mean degree {mean:.2}", seg.start, seg.adjacency.n());
    }
    write_scenario(&sc, File::create(dir.join("scenario.mtx"))?)?;
    write_stream(&sc.signals, File::create(dir.join("stream.csv"))?)?;
    println!("wrote {}", dir.display());
    Ok(())
}
