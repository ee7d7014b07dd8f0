//! Online estimation on a synthetic expanding graph: one projected proximal
//! gradient step per sample, compared with the offline optimum every 50 steps.
//!
//! Run: cargo run --release --example online_tracking

use expanding_graph::covariance::CovarianceModel;
use expanding_graph::gmrf::{offline_solve, SolverOptions};
use expanding_graph::metrics::nerr;
use expanding_graph::synth::{build_scenario, ArrivalSchedule, ScenarioSpec};
use expanding_graph::{Gmrf, GmrfParams, OnlineLearner, OnlineOptions};

fn main() -> expanding_graph::Result<()> {
    let spec = ScenarioSpec {
        schedule: ArrivalSchedule::new(30, 1200, vec![(400, 5), (800, 5)])?,
        avg_degree: 3.0,
        delta: 0.2,
        rewire_every: None,
    };
    let sc = build_scenario(&spec, 2)?;
    let params = GmrfParams::new(1.0, 100.0, 0.0, 0.01)?;
    let opts = OnlineOptions::new(params.eta_max(), 1.0, 3)?;
    let mut learner = OnlineLearner::new(Gmrf::new(params)?, CovarianceModel::expanding(30, 0.99)?, opts)?;

    let mut prev_opt = None;
    println!("{:>5} {:>3} {:>12} {:>12}", "t", "n", "vs offline", "vs truth");
    for (k, x) in sc.signals.iter().enumerate() {
        let t = k as u64 + 1;
        learner.step(x, sc.schedule.arrivals_at(t))?;
        if t.is_multiple_of(50) {
            let opt = offline_solve(learner.covariance(), prev_opt.as_ref(), &params, &SolverOptions::baseline(1.0))?;
            println!(
                "{t:>5} {:>3} {:>12.4e} {:>12.4}",
                learner.dim(),
                nerr(learner.estimate(), &opt.s)?,
                nerr(learner.estimate(), sc.truth_at(t))?
            );
            prev_opt = Some(opt.s);
        }
    }
    Ok(())
}
