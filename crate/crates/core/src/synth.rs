//! Synthetic expanding graphs and Gaussian signals on them.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::matops::SymMatrix;

/// Node arrivals over a finite horizon; times are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalSchedule {
    pub n0: usize,
    pub horizon: u64,
    /// `(time, count)` pairs with strictly increasing times in `(1, horizon]`.
    pub events: Vec<(u64, usize)>,
}

impl ArrivalSchedule {
    pub fn new(n0: usize, horizon: u64, events: Vec<(u64, usize)>) -> Result<Self> {
        let s = Self { n0, horizon, events };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(param_err("initial node count must be positive"));
        }
        let mut last = 1;
        for &(t, count) in &self.events {
            if t <= last || t > self.horizon {
                return Err(param_err(format!(
                    "arrival times must increase strictly within (1, {}], got {t} after {last}",
                    self.horizon
                )));
            }
            if count == 0 {
                return Err(param_err(format!("arrival at t = {t} has no nodes")));
            }
            last = t;
        }
        Ok(())
    }

    /// Number of nodes joining at time `t`.
    pub fn arrivals_at(&self, t: u64) -> usize {
        self.events.iter().find(|e| e.0 == t).map_or(0, |e| e.1)
    }

    /// Node count `N_t`.
    pub fn n_at(&self, t: u64) -> usize {
        self.n0 + self.events.iter().filter(|e| e.0 <= t).map(|e| e.1).sum::<usize>()
    }

    pub fn n_final(&self) -> usize {
        self.n_at(self.horizon)
    }
}

fn edge_prob(n: usize, avg_degree: f64) -> Result<f64> {
    if n < 2 {
        return Err(param_err(format!("graph needs at least 2 nodes, got {n}")));
    }
    if !(avg_degree > 0.0 && avg_degree < n as f64) {
        return Err(param_err(format!("average degree must lie in (0, {n}), got {avg_degree}")));
    }
    Ok((avg_degree / (n - 1) as f64).min(1.0))
}

/// Erdős–Rényi adjacency with edge probability `avg_degree / (n - 1)`.
pub fn generate_er(n: usize, avg_degree: f64, rng: &mut impl Rng) -> Result<SymMatrix> {
    let p = edge_prob(n, avg_degree)?;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            if rng.random_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    Ok(SymMatrix::from_matrix_unchecked(a))
}

/// Appends `k` nodes to adjacency `a`. Each new node links to every node
/// already present (including earlier newcomers) with the ER probability of
/// the old graph; a newcomer without any edge gets one to a uniformly chosen
/// old node.
pub fn attach_nodes(a: &SymMatrix, k: usize, avg_degree: f64, rng: &mut impl Rng) -> Result<SymMatrix> {
    if k == 0 {
        return Err(param_err("must attach at least one node"));
    }
    let n = a.n();
    let p = edge_prob(n, avg_degree)?;
    let mut m = DMatrix::zeros(n + k, n + k);
    m.view_mut((0, 0), (n, n)).copy_from(a.as_matrix());
    let old: Vec<usize> = (0..n).collect();
    for v in n..n + k {
        let mut linked = false;
        for u in 0..v {
            if rng.random_bool(p) {
                m[(u, v)] = 1.0;
                m[(v, u)] = 1.0;
                linked = true;
            }
        }
        if !linked {
            let &u = old.choose(rng).expect("old graph is nonempty");
            m[(u, v)] = 1.0;
            m[(v, u)] = 1.0;
        }
    }
    Ok(SymMatrix::from_matrix_unchecked(m))
}

/// Node degrees of an adjacency matrix.
pub fn degrees(a: &SymMatrix) -> Vec<f64> {
    a.as_matrix().row_iter().map(|r| r.sum()).collect()
}

pub fn max_degree(a: &SymMatrix) -> usize {
    degrees(a).into_iter().fold(0.0, f64::max) as usize
}

/// `L + delta I` with `L` the combinatorial Laplacian of `a`.
pub fn precision_from_adjacency(a: &SymMatrix, delta: f64) -> Result<SymMatrix> {
    if !(delta > 0.0) {
        return Err(param_err(format!("delta must be positive, got {delta}")));
    }
    let d = degrees(a);
    let m = a.as_matrix();
    Ok(SymMatrix::from_upper_fn(a.n(), |i, j| if i == j { d[i] + delta - m[(i, i)] } else { -m[(i, j)] }))
}

/// Draws `x ~ N(0, S⁻¹)` for a fixed precision `S`.
#[derive(Clone, Debug)]
pub struct GmrfSampler {
    // upper Cholesky factor Lᵀ of S = L Lᵀ
    upper: DMatrix<f64>,
}

impl GmrfSampler {
    pub fn new(precision: &SymMatrix) -> Result<Self> {
        let chol = precision
            .as_matrix()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("precision matrix is not positive definite".into()))?;
        Ok(Self { upper: chol.l().transpose() })
    }

    pub fn dim(&self) -> usize {
        self.upper.nrows()
    }

    /// Solves `Lᵀ x = z`, so `cov(x) = (L Lᵀ)⁻¹`.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.dim();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        self.upper.solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal").as_slice().to_vec()
    }
}

/// One zero-mean sample with precision `s_true`.
pub fn sample_gmrf(s_true: &SymMatrix, rng: &mut impl Rng) -> Result<Vec<f64>> {
    Ok(GmrfSampler::new(s_true)?.sample(rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schedule: ArrivalSchedule,
    pub avg_degree: f64,
    pub delta: f64,
    /// When set, every this many steps one existing edge is moved to a
    /// currently unconnected pair of present nodes.
    pub rewire_every: Option<u64>,
}

/// Ground truth held constant over `[start, next start)`.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: u64,
    pub adjacency: SymMatrix,
    pub precision: SymMatrix,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub schedule: ArrivalSchedule,
    pub delta: f64,
    pub segments: Vec<Segment>,
    /// `signals[t - 1]` is the sample at time `t`.
    pub signals: Vec<Vec<f64>>,
}

impl Scenario {
    fn segment_index(&self, t: u64) -> usize {
        self.segments.partition_point(|s| s.start <= t).saturating_sub(1)
    }

    /// Ground-truth precision at time `t`.
    pub fn truth_at(&self, t: u64) -> &SymMatrix {
        &self.segments[self.segment_index(t)].precision
    }

    pub fn adjacency_at(&self, t: u64) -> &SymMatrix {
        &self.segments[self.segment_index(t)].adjacency
    }

    pub fn horizon(&self) -> u64 {
        self.schedule.horizon
    }
}

fn rewire(a: &SymMatrix, rng: &mut impl Rng) -> SymMatrix {
    let n = a.n();
    let m = a.as_matrix();
    let mut edges = Vec::new();
    let mut holes = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if m[(i, j)] != 0.0 {
                edges.push((i, j));
            } else {
                holes.push((i, j));
            }
        }
    }
    let mut out = m.clone();
    if let (Some(&(a0, b0)), Some(&(a1, b1))) = (edges.choose(rng), holes.choose(rng)) {
        out[(a0, b0)] = 0.0;
        out[(b0, a0)] = 0.0;
        out[(a1, b1)] = 1.0;
        out[(b1, a1)] = 1.0;
    }
    SymMatrix::from_matrix_unchecked(out)
}

/// Builds the ground-truth sequence and one signal per time step.
pub fn build_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Scenario> {
    spec.schedule.validate()?;
    if spec.rewire_every == Some(0) {
        return Err(param_err("rewire_every must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency = generate_er(spec.schedule.n0, spec.avg_degree, &mut rng)?;
    let mut precision = precision_from_adjacency(&adjacency, spec.delta)?;
    let mut sampler = GmrfSampler::new(&precision)?;
    let mut segments = vec![Segment { start: 1, adjacency: adjacency.clone(), precision: precision.clone() }];
    let horizon = spec.schedule.horizon;
    let mut signals = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let k = spec.schedule.arrivals_at(t);
        let rewired = spec.rewire_every.is_some_and(|r| t > 1 && (t - 1) % r == 0);
        if k > 0 || rewired {
            if rewired {
                adjacency = rewire(&adjacency, &mut rng);
            }
            if k > 0 {
                adjacency = attach_nodes(&adjacency, k, spec.avg_degree, &mut rng)?;
            }
            precision = precision_from_adjacency(&adjacency, spec.delta)?;
            sampler = GmrfSampler::new(&precision)?;
            segments.push(Segment { start: t, adjacency: adjacency.clone(), precision: precision.clone() });
        }
        signals.push(sampler.sample(&mut rng));
    }
    Ok(Scenario { schedule: spec.schedule.clone(), delta: spec.delta, segments, signals })
}

/// Writes the schedule and every distinct ground truth in a
/// matrix-market-like text format (lower triangle, 1-based indices).
pub fn write_scenario(sc: &Scenario, mut w: impl Write) -> Result<()> {
    writeln!(w, "%%ExpandingScenario n0={} horizon={} delta={}", sc.schedule.n0, sc.schedule.horizon, sc.delta)?;
    for &(t, k) in &sc.schedule.events {
        writeln!(w, "%arrival {t} {k}")?;
    }
    for seg in &sc.segments {
        let n = seg.precision.n();
        let m = seg.precision.as_matrix();
        let entries: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|j| (j..n).map(move |i| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "%start {}", seg.start)?;
        writeln!(w, "{n} {n} {}", entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
        }
    }
    Ok(())
}

/// Reads back the `(start, precision)` blocks written by [`write_scenario`].
pub fn read_scenario_truths(r: impl BufRead) -> Result<Vec<(u64, SymMatrix)>> {
    let bad = |line: usize, what: &str| Error::Format(format!("scenario line {line}: {what}"));
    let mut out = Vec::new();
    let mut lines = r.lines().enumerate();
    while let Some((no, line)) = lines.next() {
        let line = line?;
        let Some(start) = line.strip_prefix("%start ") else { continue };
        let start: u64 = start.trim().parse().map_err(|_| bad(no + 1, "bad start time"))?;
        let (no, header) = lines.next().ok_or_else(|| bad(no + 1, "missing size line"))?;
        let header = header?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(no + 1, "bad size line"))?;
        let [n, _, nnz] = dims[..] else { return Err(bad(no + 1, "size line needs 3 fields")) };
        let mut m = DMatrix::zeros(n, n);
        for _ in 0..nnz {
            let (no, entry) = lines.next().ok_or_else(|| bad(no + 1, "truncated entries"))?;
            let entry = entry?;
            let f: Vec<&str> = entry.split_whitespace().collect();
            let parsed = match f[..] {
                [i, j, v] => i.parse::<usize>().ok().zip(j.parse::<usize>().ok()).zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), v) = parsed.ok_or_else(|| bad(no + 1, "bad entry"))?;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(bad(no + 1, "index out of range"));
            }
            m[(i - 1, j - 1)] = v;
            m[(j - 1, i - 1)] = v;
        }
        out.push((start, SymMatrix::new(m)?));
    }
    Ok(out)
}
