//! Small-instance checks of the tracking guarantees.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EstimatorKind;
use super::runner::{log_path, Manifest};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::gmrf::{diagonal_guess, offline_solve_from, Gmrf, GmrfParams, SolverOptions};
use crate::matops::{frob_dist, zero_pad, SymMatrix};
use crate::metrics::{contraction_rho, path_length_arrival_bound, regret_bound_parts, RegretBound, RegretLog};
use crate::online::{OnlineLearner, OnlineOptions};
use crate::synth::{attach_nodes, build_scenario, generate_er, max_degree, ArrivalSchedule, ScenarioSpec};

/// Shared knobs of the tracking checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingSetup {
    pub n0: usize,
    pub horizon: u64,
    pub arrivals: Vec<(u64, usize)>,
    pub avg_degree: f64,
    pub delta: f64,
    pub params: GmrfParams,
    pub eta: f64,
    pub h: f64,
    pub gamma: f64,
    pub iters_per_step: usize,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
}

impl TrackingSetup {
    /// Contraction setting: ten nodes, no arrivals.
    pub fn contraction_default() -> Self {
        let epsilon = 0.3;
        Self {
            n0: 10,
            horizon: 60,
            arrivals: vec![],
            avg_degree: 3.0,
            delta: 0.5,
            params: GmrfParams { epsilon, sigma: 10.0, alpha: 0.0, lambda: 0.02 },
            eta: epsilon * epsilon,
            h: 1.0,
            gamma: 0.95,
            iters_per_step: 1,
            oracle_tol: 1e-10,
            oracle_max_iter: 50_000,
        }
    }

    /// Regret setting: at most fifteen nodes, two arrival events.
    pub fn regret_default() -> Self {
        let epsilon = 0.3;
        Self {
            n0: 10,
            horizon: 300,
            arrivals: vec![(100, 2), (200, 3)],
            avg_degree: 3.0,
            delta: 0.5,
            params: GmrfParams { epsilon, sigma: 10.0, alpha: 0.5, lambda: 0.02 },
            eta: epsilon * epsilon,
            h: 1.0,
            gamma: 0.95,
            iters_per_step: 1,
            oracle_tol: 1e-10,
            oracle_max_iter: 50_000,
        }
    }

    fn scenario_spec(&self) -> Result<ScenarioSpec> {
        Ok(ScenarioSpec {
            schedule: ArrivalSchedule::new(self.n0, self.horizon, self.arrivals.clone())?,
            avg_degree: self.avg_degree,
            delta: self.delta,
            rewire_every: None,
        })
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions { eta: self.eta, tol: self.oracle_tol, max_iter: self.oracle_max_iter }
    }

    fn learner(&self) -> Result<OnlineLearner<Gmrf>> {
        let opts = OnlineOptions::new(self.eta, self.h, self.iters_per_step)?;
        OnlineLearner::new(Gmrf::new(self.params)?, CovarianceModel::expanding(self.n0, self.gamma)?, opts)
    }

    pub fn rho(&self) -> Result<f64> {
        contraction_rho(self.h, self.eta, self.params.sigma)
    }
}

/// Fixed point of the iteration the learner runs next, anchored where the
/// learner is anchored.
fn oracle(setup: &TrackingSetup, cov: &SymMatrix, anchor: &SymMatrix, warm: Option<&SymMatrix>) -> Result<SymMatrix> {
    let start = match warm {
        Some(w) => zero_pad(w, cov.n())?,
        None => diagonal_guess(cov, &setup.params),
    };
    let anchor = (setup.params.alpha > 0.0).then_some(anchor);
    let sol = offline_solve_from(cov, anchor, start, &setup.params, &setup.solver())?;
    if !sol.converged {
        return Err(Error::Numerical(format!(
            "oracle stopped after {} iterations with residual {:e}",
            sol.iterations, sol.residual
        )));
    }
    Ok(sol.s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub rho: f64,
    pub checked: usize,
    pub satisfied: usize,
    /// Largest `‖Ŝ_{t+1} - S*_t‖ / ‖Ŝ_t - S*_t‖` seen.
    pub worst_ratio: f64,
}

impl ContractionReport {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            return 1.0;
        }
        self.satisfied as f64 / self.checked as f64
    }
}

/// Runs the learner along a synthetic stream; at every step it solves the
/// current problem to high precision and checks that one more step with the
/// covariance held fixed moves the estimate closer to that solution by the
/// factor `rho`, up to `slack`.
pub fn check_contraction(setup: &TrackingSetup, seeds: &[u64], slack: f64) -> Result<ContractionReport> {
    let rho = setup.rho()?;
    let mut report = ContractionReport { rho, checked: 0, satisfied: 0, worst_ratio: 0.0 };
    for &seed in seeds {
        let sc = build_scenario(&setup.scenario_spec()?, seed)?;
        let mut learner = setup.learner()?;
        let mut warm: Option<SymMatrix> = None;
        for (k, x) in sc.signals.iter().enumerate() {
            learner.step(x, sc.schedule.arrivals_at(k as u64 + 1))?;
            let s_t = learner.estimate().clone();
            let s_star = oracle(setup, learner.covariance(), &s_t, warm.as_ref())?;
            let before = frob_dist(&s_t, &s_star)?;
            let mut probe = learner.clone();
            let after = frob_dist(probe.step_fixed_covariance()?, &s_star)?;
            report.checked += 1;
            if after <= rho * before + slack {
                report.satisfied += 1;
            }
            if before > 0.0 {
                report.worst_ratio = report.worst_ratio.max(after / before);
            }
            warm = Some(s_star);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretCheck {
    pub seed: u64,
    /// `Σ_t ‖Ŝ_t - S*_t‖_F`.
    pub measured: f64,
    pub bound: RegretBound,
}

impl RegretCheck {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound.bound
    }
}

/// Tracks a synthetic stream with the learner and compares the cumulative
/// tracking error against `K1 + K2 * path_length`, where `S*_t` solves the
/// problem the learner faces at `t` (same covariance and anchor).
pub fn check_regret_bound(setup: &TrackingSetup, seed: u64) -> Result<RegretCheck> {
    let rho = setup.rho()?;
    let sc = build_scenario(&setup.scenario_spec()?, seed)?;
    let mut learner = setup.learner()?;
    let mut prev_opt: Option<SymMatrix> = None;
    let (mut measured, mut path, mut first, mut last) = (0.0, 0.0, 0.0, 0.0);
    for (k, x) in sc.signals.iter().enumerate() {
        let anchor = learner.estimate().clone();
        let s_hat = learner.step(x, sc.schedule.arrivals_at(k as u64 + 1))?.clone();
        let s_star = oracle(setup, learner.covariance(), &anchor, prev_opt.as_ref())?;
        let err = frob_dist(&s_hat, &s_star)?;
        if k == 0 {
            first = err;
        }
        last = err;
        measured += err;
        if let Some(p) = &prev_opt {
            path += frob_dist(&s_star, &zero_pad(p, s_star.n())?)?;
        }
        prev_opt = Some(s_star);
    }
    Ok(RegretCheck { seed, measured, bound: regret_bound_parts(first, last, rho, path)? })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrivalEvent {
    pub n_old: usize,
    pub incoming: usize,
    pub d_max: usize,
    pub drift: f64,
    pub bound: f64,
}

/// Draws `events` arrivals on binary ER graphs and measures
/// `‖A_t - pad(A_{t-1})‖_F` against `sqrt(2 d_max |I_t|)`.
pub fn check_arrival_bound(events: usize, seed: u64) -> Result<Vec<ArrivalEvent>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(events);
    for e in 0..events {
        let n_old = 20 + 5 * (e % 7);
        let incoming = 1 + e % 6;
        let avg_degree = 2.0 + (e % 4) as f64;
        let a = generate_er(n_old, avg_degree, &mut rng)?;
        let b = attach_nodes(&a, incoming, avg_degree, &mut rng)?;
        let d_max = max_degree(&b);
        let drift = frob_dist(&b, &zero_pad(&a, b.n())?)?;
        out.push(ArrivalEvent { n_old, incoming, d_max, drift, bound: path_length_arrival_bound(d_max, incoming) });
    }
    Ok(out)
}

/// Bound report for one estimator run of a finished experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunBound {
    pub realization: usize,
    pub estimator: String,
    pub measured: f64,
    pub bound: RegretBound,
}

/// Recomputes the regret bound for the online estimators of a finished run.
/// The run must have computed offline optima at every step.
pub fn bound_from_run(out_dir: &Path) -> Result<Vec<RunBound>> {
    let manifest = Manifest::read(out_dir)?;
    let cfg = &manifest.config;
    if cfg.oracle_every != 1 {
        return Err(Error::Config(format!(
            "the bound needs offline optima at every step; run used oracle_every = {}",
            cfg.oracle_every
        )));
    }
    let mut out = Vec::new();
    for entry in manifest.realizations.iter().filter(|e| e.ok) {
        for spec in &manifest.estimators {
            let (h, cov) = match spec.kind {
                EstimatorKind::Offline => continue,
                EstimatorKind::Batch => (1.0, "stationary"),
                EstimatorKind::Dynamic => (cfg.h_old.unwrap_or(cfg.h).min(cfg.h_new.unwrap_or(cfg.h)), "dynamic"),
                EstimatorKind::Expanding => (cfg.h_old.unwrap_or(cfg.h).min(cfg.h_new.unwrap_or(cfg.h)), "expanding"),
            };
            let rho = contraction_rho(h, cfg.eta(), cfg.sigma)?;
            let path = *entry
                .path_length
                .get(cov)
                .ok_or_else(|| Error::Format(format!("manifest lacks the {cov} path length")))?;
            let file = std::fs::File::open(log_path(out_dir, entry.index, &spec.label))?;
            let log = RegretLog::read_csv(std::io::BufReader::new(file))?;
            let cum: Vec<f64> = log.records().iter().filter_map(|r| r.frob_regret).collect();
            let (Some(&first), Some(&total)) = (cum.first(), cum.last()) else {
                return Err(Error::Format(format!("log of {} has no regret values", spec.label)));
            };
            let last = if cum.len() > 1 { total - cum[cum.len() - 2] } else { total };
            out.push(RunBound {
                realization: entry.index,
                estimator: spec.label.clone(),
                measured: total,
                bound: regret_bound_parts(first, last, rho, path)?,
            });
        }
    }
    Ok(out)
}
