//! Tracks the covariance of a stream where three nodes join halfway, with the
//! masked expanding rule and with the plain forgetting rule.
//!
//! Run: cargo run --release --example covariance_tracking

use expanding_graph::covariance::CovarianceModel;
use expanding_graph::matops::{frob_dist, SymMatrix};
use expanding_graph::synth::{build_scenario, ArrivalSchedule, ScenarioSpec};

fn main() -> expanding_graph::Result<()> {
    let spec = ScenarioSpec {
        schedule: ArrivalSchedule::new(6, 400, vec![(200, 3)])?,
        avg_degree: 2.0,
        delta: 0.5,
        rewire_every: None,
    };
    let sc = build_scenario(&spec, 11)?;
    let gamma = 0.995;
    let mut expanding = CovarianceModel::expanding(6, gamma)?;
    let mut dynamic = CovarianceModel::dynamic(6, gamma)?;

    println!("{:>5} {:>3} {:>12} {:>12}", "t", "n", "expanding", "dynamic");
    for (k, x) in sc.signals.iter().enumerate() {
        let t = k as u64 + 1;
        let n_new = sc.schedule.arrivals_at(t);
        expanding.update(x, n_new)?;
        dynamic.update(x, n_new)?;
        if t.is_multiple_of(50) || n_new > 0 {
            // the model covariance is the inverse of the true precision
            let truth = sc.truth_at(t).spectrum()?.reconstruct_with(|v| 1.0 / v);
            let rel = |c: &SymMatrix| frob_dist(c, &truth).map(|d| d / truth.frobenius_norm());
            println!(
                "{t:>5} {:>3} {:>12.4} {:>12.4}",
                x.len(),
                rel(expanding.covariance())?,
                rel(dynamic.covariance())?
            );
        }
    }
    Ok(())
}
