use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::GmrfParams;
use crate::online::{BlockWeights, OnlineOptions};
use crate::synth::{ArrivalSchedule, ScenarioSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Synth,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Offline solve on the expanding covariance.
    Offline,
    /// Warm-started iterations on the running-mean covariance of all samples.
    Batch,
    /// Online steps on the exponentially forgotten, zero-padded covariance.
    Dynamic,
    /// Online steps on the masked expanding covariance.
    Expanding,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Offline => "offline",
            EstimatorKind::Batch => "batch",
            EstimatorKind::Dynamic => "dynamic",
            EstimatorKind::Expanding => "expanding",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn all_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Offline, EstimatorKind::Batch, EstimatorKind::Dynamic, EstimatorKind::Expanding]
}

mod defaults {
    pub fn lambda() -> f64 {
        0.01
    }
    pub fn gamma() -> f64 {
        0.99
    }
    pub fn h() -> f64 {
        1.0
    }
    pub fn epsilon() -> f64 {
        1.0
    }
    pub fn sigma() -> f64 {
        400.0
    }
    pub fn one() -> usize {
        1
    }
    pub fn batch_iters() -> usize {
        10
    }
    pub fn avg_degree() -> f64 {
        4.0
    }
    pub fn delta() -> f64 {
        0.1
    }
    pub fn oracle_every() -> u64 {
        25
    }
    pub fn oracle_tol() -> f64 {
        1e-6
    }
    pub fn oracle_max_iter() -> usize {
        2000
    }
    pub fn yes() -> bool {
        true
    }
}

/// Experiment description, read from a flat JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,

    /// Step size; defaults to `epsilon²`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::h")]
    pub h: f64,
    /// Blend weight for previously present nodes; defaults to `h`.
    #[serde(default)]
    pub h_old: Option<f64>,
    /// Blend weight for rows of newly arrived nodes; defaults to `h`.
    #[serde(default)]
    pub h_new: Option<f64>,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    #[serde(default = "defaults::one")]
    pub iters_per_step: usize,
    /// When non-empty, the dynamic and expanding estimators run once per entry.
    #[serde(default)]
    pub iters_sweep: Vec<usize>,
    #[serde(default = "defaults::batch_iters")]
    pub batch_iters: usize,

    #[serde(default)]
    pub n0: Option<usize>,
    #[serde(default)]
    pub horizon: Option<u64>,
    /// `[time, count]` pairs.
    #[serde(default)]
    pub arrivals: Vec<(u64, usize)>,
    #[serde(default = "defaults::avg_degree")]
    pub avg_degree: f64,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default)]
    pub rewire_every: Option<u64>,

    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub standardize: bool,

    #[serde(default = "defaults::one")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,

    /// Offline optima are computed every this many steps; 0 disables them.
    #[serde(default = "defaults::oracle_every")]
    pub oracle_every: u64,
    #[serde(default = "defaults::oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "defaults::oracle_max_iter")]
    pub oracle_max_iter: usize,
    /// Record per-step wall time. Without it, repeated runs are byte-identical.
    #[serde(default = "defaults::yes")]
    pub timing: bool,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Step size after defaults.
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.epsilon * self.epsilon)
    }

    /// Copy with every optional knob made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.eta = Some(self.eta());
        c.h_old = Some(self.h_old.unwrap_or(self.h));
        c.h_new = Some(self.h_new.unwrap_or(self.h));
        c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("{name} must be nonnegative, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(cfg_err(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("sigma", self.sigma)?;
        nonneg("alpha", self.alpha)?;
        nonneg("lambda", self.lambda)?;
        unit("h", self.h)?;
        if let Some(v) = self.h_old {
            unit("h_old", v)?;
        }
        if let Some(v) = self.h_new {
            unit("h_new", v)?;
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(cfg_err(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        let eta = self.eta();
        positive("eta", eta)?;
        let bound = self.epsilon * self.epsilon;
        if eta > bound {
            return Err(cfg_err(format!("eta must satisfy eta <= epsilon^2 = {bound}, got {eta}")));
        }
        if self.iters_per_step == 0 || self.iters_sweep.contains(&0) {
            return Err(cfg_err("iters_per_step must be at least 1"));
        }
        if self.batch_iters == 0 {
            return Err(cfg_err("batch_iters must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(cfg_err("realizations must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(cfg_err("estimators must not be empty"));
        }
        for (k, e) in self.estimators.iter().enumerate() {
            if self.estimators[..k].contains(e) {
                return Err(cfg_err(format!("estimator {e} listed twice")));
            }
        }
        positive("oracle_tol", self.oracle_tol)?;
        if self.oracle_max_iter == 0 {
            return Err(cfg_err("oracle_max_iter must be at least 1"));
        }
        match self.mode {
            Mode::Synth => {
                self.scenario_spec()?;
            }
            Mode::Csv => {
                if self.input.is_none() {
                    return Err(cfg_err("csv mode requires field `input`"));
                }
            }
        }
        Ok(())
    }

    pub fn gmrf_params(&self) -> Result<GmrfParams> {
        GmrfParams::new(self.epsilon, self.sigma, self.alpha, self.lambda)
    }

    pub fn online_options(&self, iters_per_step: usize) -> Result<OnlineOptions> {
        let weights = BlockWeights::new(self.h_old.unwrap_or(self.h), self.h_new.unwrap_or(self.h))?;
        let mut opts = OnlineOptions::new(self.eta(), 1.0, iters_per_step)?;
        opts.weights = weights;
        Ok(opts)
    }

    /// Scenario description for synth mode.
    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let n0 = self.n0.ok_or_else(|| cfg_err("synth mode requires field `n0`"))?;
        let horizon = self.horizon.ok_or_else(|| cfg_err("synth mode requires field `horizon`"))?;
        if horizon == 0 {
            return Err(cfg_err("horizon must be at least 1"));
        }
        let schedule =
            ArrivalSchedule::new(n0, horizon, self.arrivals.clone()).map_err(|e| cfg_err(format!("arrivals: {e}")))?;
        if !(self.avg_degree > 0.0 && self.avg_degree < n0 as f64) {
            return Err(cfg_err(format!("avg_degree must lie in (0, n0 = {n0}), got {}", self.avg_degree)));
        }
        if !(self.delta > 0.0) {
            return Err(cfg_err(format!("delta must be positive, got {}", self.delta)));
        }
        if self.rewire_every == Some(0) {
            return Err(cfg_err("rewire_every must be positive"));
        }
        Ok(ScenarioSpec { schedule, avg_degree: self.avg_degree, delta: self.delta, rewire_every: self.rewire_every })
    }

    /// Seed of realization `i`.
    pub fn seed_of(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}
