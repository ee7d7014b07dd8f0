use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, write_aggregate};
use super::config::{EstimatorKind, ExperimentConfig, Mode};
use super::ingest::{read_stream_path, standardize, SignalStream};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::gmrf::{offline_solve, Gmrf, SolverOptions};
use crate::matops::{frob_dist, SymMatrix};
use crate::metrics::{median, nerr, step_drift, Metric, RegretLog};
use crate::online::{OnlineLearner, OnlineOptions};
use crate::synth::{build_scenario, write_scenario, ArrivalSchedule, Scenario};

/// One estimator instance within an experiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub label: String,
    pub kind: EstimatorKind,
    /// Iterations per sample; unused by the offline estimator.
    pub iters: usize,
}

/// Expands the configured estimators, one entry per iteration count of the
/// sweep for the online kinds.
pub fn estimator_specs(cfg: &ExperimentConfig) -> Vec<EstimatorSpec> {
    let mut out = Vec::new();
    for &kind in &cfg.estimators {
        match kind {
            EstimatorKind::Offline => out.push(EstimatorSpec { label: kind.name().into(), kind, iters: 0 }),
            EstimatorKind::Batch => out.push(EstimatorSpec { label: kind.name().into(), kind, iters: cfg.batch_iters }),
            EstimatorKind::Dynamic | EstimatorKind::Expanding => {
                if cfg.iters_sweep.is_empty() {
                    out.push(EstimatorSpec { label: kind.name().into(), kind, iters: cfg.iters_per_step });
                } else {
                    for &k in &cfg.iters_sweep {
                        out.push(EstimatorSpec { label: format!("{}_it{k}", kind.name()), kind, iters: k });
                    }
                }
            }
        }
    }
    out
}

/// Covariance rule an estimator relies on; offline optima are tracked per rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum CovKind {
    Expanding,
    Dynamic,
    Stationary,
}

impl CovKind {
    fn of(kind: EstimatorKind) -> Self {
        match kind {
            EstimatorKind::Offline | EstimatorKind::Expanding => CovKind::Expanding,
            EstimatorKind::Dynamic => CovKind::Dynamic,
            EstimatorKind::Batch => CovKind::Stationary,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CovKind::Expanding => "expanding",
            CovKind::Dynamic => "dynamic",
            CovKind::Stationary => "stationary",
        }
    }

    fn model(self, n0: usize, gamma: f64) -> Result<CovarianceModel> {
        match self {
            CovKind::Expanding => CovarianceModel::expanding(n0, gamma),
            CovKind::Dynamic => CovarianceModel::dynamic(n0, gamma),
            CovKind::Stationary => Ok(CovarianceModel::stationary(n0)),
        }
    }
}

/// Sequence of offline optima on one covariance rule.
struct OracleTrack {
    kind: CovKind,
    cov: CovarianceModel,
    prev: Option<SymMatrix>,
    latest: Option<SymMatrix>,
    solve_ms: f64,
    path_length: f64,
}

/// Log and final estimate of one estimator on one realization.
#[derive(Clone, Debug)]
pub struct EstimatorRun {
    pub spec: EstimatorSpec,
    pub log: RegretLog,
    pub final_estimate: Option<SymMatrix>,
}

#[derive(Clone, Debug)]
pub struct RealizationResult {
    pub runs: Vec<EstimatorRun>,
    /// Path length of the computed offline optima, per covariance rule.
    pub path_lengths: BTreeMap<String, f64>,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs every configured estimator over one stream. `truth`, when given,
/// supplies the ground truth at each time step.
pub fn run_realization(
    cfg: &ExperimentConfig,
    signals: &[Vec<f64>],
    schedule: &ArrivalSchedule,
    truth: Option<&Scenario>,
) -> Result<RealizationResult> {
    let specs = estimator_specs(cfg);
    let params = cfg.gmrf_params()?;
    let loss = Gmrf::new(params)?;
    let solver = SolverOptions { eta: cfg.eta(), tol: cfg.oracle_tol, max_iter: cfg.oracle_max_iter };
    let n0 = schedule.n0;
    if signals.len() as u64 != schedule.horizon {
        return Err(Error::Input(format!("{} samples for a horizon of {}", signals.len(), schedule.horizon)));
    }

    let mut kinds: Vec<CovKind> = Vec::new();
    for s in &specs {
        let needed = s.kind == EstimatorKind::Offline || cfg.oracle_every > 0;
        let k = CovKind::of(s.kind);
        if needed && !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    let mut oracles = kinds
        .into_iter()
        .map(|kind| {
            Ok(OracleTrack {
                kind,
                cov: kind.model(n0, cfg.gamma)?,
                prev: None,
                latest: None,
                solve_ms: 0.0,
                path_length: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let every = cfg.oracle_every.max(1);

    let mut learners: Vec<Option<OnlineLearner<Gmrf>>> = specs
        .iter()
        .map(|s| {
            let (cov, opts) = match s.kind {
                EstimatorKind::Offline => return Ok(None),
                EstimatorKind::Batch => (CovarianceModel::stationary(n0), OnlineOptions::new(cfg.eta(), 1.0, s.iters)?),
                EstimatorKind::Dynamic => (CovarianceModel::dynamic(n0, cfg.gamma)?, cfg.online_options(s.iters)?),
                EstimatorKind::Expanding => (CovarianceModel::expanding(n0, cfg.gamma)?, cfg.online_options(s.iters)?),
            };
            OnlineLearner::new(loss, cov, opts).map(Some)
        })
        .collect::<Result<_>>()?;
    let mut logs: Vec<RegretLog> = specs.iter().map(|_| RegretLog::new()).collect();

    for (k, x) in signals.iter().enumerate() {
        let t = k as u64 + 1;
        let n_new = schedule.arrivals_at(t);
        let n_t = schedule.n_at(t);
        let due = t.is_multiple_of(every);
        for tr in &mut oracles {
            tr.cov.update(x, n_new)?;
            tr.latest = None;
            if due {
                let start = Instant::now();
                let sol = offline_solve(tr.cov.covariance(), tr.prev.as_ref(), &params, &solver)?;
                tr.solve_ms = elapsed_ms(start);
                if !sol.converged {
                    log::warn!(
                        "offline solve on the {} covariance stopped at t = {t} with residual {:e}",
                        tr.kind.name(),
                        sol.residual
                    );
                }
                if let Some(prev) = &tr.prev {
                    tr.path_length += step_drift(prev, &sol.s)?;
                }
                tr.prev = Some(sol.s.clone());
                tr.latest = Some(sol.s);
            }
        }
        let reference = truth.map(|sc| sc.truth_at(t));
        for ((spec, learner), log) in specs.iter().zip(learners.iter_mut()).zip(logs.iter_mut()) {
            let oracle = oracles.iter().find(|o| o.kind == CovKind::of(spec.kind));
            match learner {
                None => {
                    let Some(o) = oracle else { continue };
                    let Some(s) = &o.latest else { continue };
                    let truth_err = reference.map(|r| nerr(s, r)).transpose()?;
                    let wall = cfg.timing.then_some(o.solve_ms);
                    log.push(t, n_t, Some((0.0, 0.0)), truth_err, wall)?;
                }
                Some(l) => {
                    let start = Instant::now();
                    let s = l.step(x, n_new)?;
                    let wall = cfg.timing.then(|| elapsed_ms(start));
                    let offline = match oracle.and_then(|o| o.latest.as_ref()) {
                        Some(o) if cfg.oracle_every > 0 => Some((nerr(s, o)?, frob_dist(s, o)?)),
                        _ => None,
                    };
                    let truth_err = reference.map(|r| nerr(s, r)).transpose()?;
                    log.push(t, n_t, offline, truth_err, wall)?;
                }
            }
        }
    }

    let path_lengths = oracles.iter().map(|o| (o.kind.name().to_string(), o.path_length)).collect();
    let runs = specs
        .into_iter()
        .zip(learners)
        .zip(logs)
        .map(|((spec, learner), log)| {
            let final_estimate = match learner {
                Some(l) => Some(l.estimate().clone()),
                None => oracles.iter().find(|o| o.kind == CovKind::Expanding).and_then(|o| o.prev.clone()),
            };
            EstimatorRun { spec, log, final_estimate }
        })
        .collect();
    Ok(RealizationResult { runs, path_lengths })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizationEntry {
    pub index: usize,
    pub seed: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub path_length: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingEntry {
    pub estimator: String,
    pub iters: usize,
    /// Largest node count reached.
    pub n_final: usize,
    /// Median per-step wall time at `n_final` across realizations.
    pub median_wall_ms_at_n_final: Option<f64>,
    pub median_wall_ms: Option<f64>,
}

/// Echo of an experiment written next to its results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub threads: usize,
    pub realizations: Vec<RealizationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Vec<TimingEntry>>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub fn realization_dir(out_dir: &Path, i: usize) -> PathBuf {
    out_dir.join(format!("realization_{i:03}"))
}

pub fn log_path(out_dir: &Path, i: usize, label: &str) -> PathBuf {
    realization_dir(out_dir, i).join(format!("{label}.csv"))
}

#[derive(Debug)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub estimators: Vec<EstimatorSpec>,
    pub manifest: Manifest,
    /// Realizations that failed, with their errors.
    pub failures: Vec<(usize, Error)>,
}

/// Writes `contents` through a temporary sibling and renames it into place;
/// the temporary is removed when writing fails.
fn write_atomic(path: &Path, contents: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let res = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        contents(&mut w)?;
        w.flush()?;
        drop(w);
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

type Outcome = (Result<RealizationResult>, Option<Scenario>, f64);

/// Runs all realizations on a pool of `threads` workers (0 picks the number
/// of cores) and writes logs, the aggregate table and the manifest under
/// `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let specs = estimator_specs(cfg);
    let stream = match cfg.mode {
        Mode::Csv => {
            let path = cfg.input.as_ref().expect("validated csv config has an input");
            let mut s = read_stream_path(path)?;
            if cfg.standardize {
                standardize(&mut s);
            }
            Some(s)
        }
        Mode::Synth => None,
    };
    let scenario_spec = match cfg.mode {
        Mode::Synth => Some(cfg.scenario_spec()?),
        Mode::Csv => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let workers = pool.current_num_threads();

    let run_one = |i: usize| -> Outcome {
        let start = Instant::now();
        let (res, sc) = match (&stream, &scenario_spec) {
            (Some(s), _) => (run_realization(cfg, &s.signals, &s.schedule, None), None),
            (None, Some(spec)) => match build_scenario(spec, cfg.seed_of(i)) {
                Ok(mut sc) => {
                    let res = run_realization(cfg, &sc.signals, &sc.schedule, Some(&sc));
                    sc.signals = Vec::new();
                    (res, Some(sc))
                }
                Err(e) => (Err(e), None),
            },
            (None, None) => unreachable!("mode selects a stream or a scenario"),
        };
        (res, sc, start.elapsed().as_secs_f64())
    };
    let outcomes: Vec<Outcome> = pool.install(|| (0..cfg.realizations).into_par_iter().map(run_one).collect());

    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut succeeded: Vec<RealizationResult> = Vec::new();
    for (i, (res, sc, secs)) in outcomes.into_iter().enumerate() {
        let mut entry = RealizationEntry {
            index: i,
            seed: cfg.seed_of(i),
            ok: res.is_ok(),
            error: None,
            path_length: BTreeMap::new(),
            seconds: cfg.timing.then_some(secs),
        };
        match res {
            Ok(r) => {
                let dir = realization_dir(out_dir, i);
                fs::create_dir_all(&dir)?;
                for run in &r.runs {
                    write_atomic(&log_path(out_dir, i, &run.spec.label), |w| run.log.write_csv(w))?;
                }
                if let Some(sc) = &sc {
                    write_atomic(&dir.join("scenario.mtx"), |w| write_scenario(sc, w))?;
                }
                entry.path_length = r.path_lengths.clone();
                succeeded.push(r);
            }
            Err(e) => {
                log::error!("realization {i} failed: {e}");
                entry.error = Some(e.to_string());
                failures.push((i, e));
            }
        }
        entries.push(entry);
    }

    let labels: Vec<String> = specs.iter().map(|s| s.label.clone()).collect();
    let per_label: Vec<Vec<&RegretLog>> =
        (0..specs.len()).map(|k| succeeded.iter().map(|r| &r.runs[k].log).collect()).collect();
    let rows = aggregate(&labels, &per_label);
    write_atomic(&out_dir.join(AGGREGATE_FILE), |w| write_aggregate(&rows, w))?;

    let timing =
        cfg.timing.then(|| specs.iter().enumerate().map(|(k, spec)| timing_entry(spec, &per_label[k])).collect());
    let manifest =
        Manifest { config: cfg.resolved(), estimators: specs.clone(), threads: workers, realizations: entries, timing };
    write_atomic(&out_dir.join(MANIFEST_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(ExperimentSummary { out_dir: out_dir.to_path_buf(), estimators: specs, manifest, failures })
}

fn timing_entry(spec: &EstimatorSpec, logs: &[&RegretLog]) -> TimingEntry {
    let n_final = logs.iter().flat_map(|l| l.records().last().map(|r| r.n_t)).max().unwrap_or(0);
    let mut at_final = Vec::new();
    let mut all = Vec::new();
    for l in logs {
        for r in l.records() {
            if let Some(ms) = Metric::WallMs.get(r) {
                all.push(ms);
                if r.n_t == n_final {
                    at_final.push(ms);
                }
            }
        }
    }
    TimingEntry {
        estimator: spec.label.clone(),
        iters: spec.iters,
        n_final,
        median_wall_ms_at_n_final: (!at_final.is_empty()).then(|| median(&at_final)),
        median_wall_ms: (!all.is_empty()).then(|| median(&all)),
    }
}

/// Stream and, in synth mode, ground truth of realization `i`.
pub fn realization_input(cfg: &ExperimentConfig, i: usize) -> Result<(SignalStream, Option<Scenario>)> {
    match cfg.mode {
        Mode::Synth => {
            let sc = build_scenario(&cfg.scenario_spec()?, cfg.seed_of(i))?;
            let stream = SignalStream { signals: sc.signals.clone(), schedule: sc.schedule.clone() };
            Ok((stream, Some(sc)))
        }
        Mode::Csv => {
            let path = cfg.input.as_ref().ok_or_else(|| Error::Config("csv mode requires field `input`".into()))?;
            let mut s = read_stream_path(path)?;
            if cfg.standardize {
                standardize(&mut s);
            }
            Ok((s, None))
        }
    }
}
