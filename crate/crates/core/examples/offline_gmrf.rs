//! Solves the graphical model problem on a sample covariance with the
//! projected proximal gradient solver and compares the support with the truth.
//!
//! Run: cargo run --release --example offline_gmrf

use expanding_graph::covariance::stationary_update;
use expanding_graph::gmrf::{objective, offline_solve, GmrfParams, SolverOptions};
use expanding_graph::matops::SymMatrix;
use expanding_graph::metrics::nerr;
use expanding_graph::synth::{generate_er, precision_from_adjacency, GmrfSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> expanding_graph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20;
    let adjacency = generate_er(n, 3.0, &mut rng)?;
    let truth = precision_from_adjacency(&adjacency, 0.5)?;
    let sampler = GmrfSampler::new(&truth)?;

    let mut c = SymMatrix::zeros(n);
    for t in 1..=2000 {
        c = stationary_update(&c, &sampler.sample(&mut rng), t)?;
    }

    let p = GmrfParams::new(0.5, 100.0, 0.0, 0.02)?;
    let sol = offline_solve(&c, None, &p, &SolverOptions::oracle(p.eta_max()))?;
    println!("iterations {} residual {:.2e} converged {}", sol.iterations, sol.residual, sol.converged);
    println!("objective {:.6}", objective(&sol.s, &c, None, &p)?);
    println!("nerr against the true precision {:.4}", nerr(&sol.s, &truth)?);

    let (mut hit, mut edges, mut spurious) = (0, 0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let found = sol.s.get(i, j).abs() > 1e-8;
            if adjacency.get(i, j) != 0.0 {
                edges += 1;
                hit += found as usize;
            } else {
                spurious += found as usize;
            }
        }
    }
    println!("recovered {hit}/{edges} edges, {spurious} spurious");
    Ok(())
}
