//! Checks the per-step contraction, the cumulative regret bound and the
//! arrival drift bound on small instances.
//!
//! Run: cargo run --release --example regret_bound

use expanding_graph::experiment::verify::{check_arrival_bound, check_contraction, check_regret_bound, TrackingSetup};

fn main() -> expanding_graph::Result<()> {
    let mut setup = TrackingSetup::contraction_default();
    setup.horizon = 30;
    let c = check_contraction(&setup, &[0, 1, 2], 1e-8)?;
    println!("contraction: {}/{} steps, rho {:.5}, worst ratio {:.5}", c.satisfied, c.checked, c.rho, c.worst_ratio);

    let setup = TrackingSetup::regret_default();
    for seed in 0..3 {
        let r = check_regret_bound(&setup, seed)?;
        println!(
            "seed {seed}: regret {:.4} bound {:.4} (K1 {:.3}, K2 {:.3}, path {:.4})",
            r.measured, r.bound.bound, r.bound.k1, r.bound.k2, r.bound.path_length
        );
    }

    let events = check_arrival_bound(10, 0)?;
    for e in &events {
        println!(
            "{:>2} old + {} new, d_max {:>2}: drift {:.3} <= {:.3}",
            e.n_old, e.incoming, e.d_max, e.drift, e.bound
        );
    }
    Ok(())
}
