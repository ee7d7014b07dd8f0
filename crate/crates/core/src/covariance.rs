//! Recursive sample-covariance estimates for streams whose dimension grows.
//!
//! [`CovarianceTracker`] implements the masked update: entries among nodes that
//! were present before the latest arrival are tracked with a forgetting factor,
//! while every entry touching a newly arrived node is a plain running mean of the
//! samples seen since that arrival. [`stationary_update`] and [`dynamic_update`]
//! are the classical fixed-dimension rules, used by the baselines.

use crate::error::{dim_err, param_err, Error, Result};
use crate::matops::{zero_pad, SymMatrix};

/// Entry-wise weights applied to the padded previous covariance (`m1`) and to
/// the new outer product (`m2`).
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    pub m1: SymMatrix,
    pub m2: SymMatrix,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(param_err(format!("forgetting factor must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_sample(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(dim_err(format!("sample has length {}, expected {n}", x.len())));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("sample entry {i} is not finite ({})", x[i])));
    }
    Ok(())
}

/// Masks for a side-`n_total` covariance whose leading `n_tau` nodes predate the
/// latest arrival, `t_tilde` samples after (and including) that arrival.
pub fn build_masks(n_total: usize, n_tau: usize, gamma: f64, t_tilde: u64) -> Result<MaskPair> {
    if n_tau > n_total {
        return Err(dim_err(format!("old block {n_tau} larger than matrix side {n_total}")));
    }
    if t_tilde == 0 {
        return Err(param_err("t_tilde must be at least 1"));
    }
    check_gamma(gamma)?;
    let tt = t_tilde as f64;
    let (keep_new, take_new) = ((tt - 1.0) / tt, 1.0 / tt);
    // upper triangle only (i <= j), so j < n_tau means both indices are old
    let m1 = SymMatrix::from_upper_fn(n_total, |_, j| if j < n_tau { gamma } else { keep_new });
    let m2 = SymMatrix::from_upper_fn(n_total, |_, j| if j < n_tau { 1.0 - gamma } else { take_new });
    Ok(MaskPair { m1, m2 })
}

/// Sample covariance of an expanding stream, updated with the masked rule.
#[derive(Clone, Debug)]
pub struct CovarianceTracker {
    c_hat: SymMatrix,
    t: u64,
    tau: u64,
    n_tau: usize,
    gamma: f64,
}

impl CovarianceTracker {
    /// Starts from `initial` at time 0 with no arrival recorded.
    pub fn new(initial: SymMatrix, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let n_tau = initial.n();
        Ok(Self { c_hat: initial, t: 0, tau: 0, n_tau, gamma })
    }

    pub fn with_zeros(n: usize, gamma: f64) -> Result<Self> {
        Self::new(SymMatrix::zeros(n), gamma)
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.c_hat
    }

    /// Number of samples absorbed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Time of the latest arrival (0 if none).
    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Side of the covariance right before the latest arrival.
    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.c_hat.n()
    }

    /// Absorbs `x`, which carries `n_new` more entries than the current side.
    ///
    /// Samples since an arrival are counted including the arrival instant itself,
    /// so the first post-arrival sample sets every new-node entry to `x xᵀ`.
    pub fn expanding_update(&mut self, x: &[f64], n_new: usize) -> Result<&SymMatrix> {
        let n_prev = self.c_hat.n();
        let n_t = n_prev + n_new;
        check_sample(x, n_t)?;

        let now = self.t + 1;
        let (tau, n_tau) = if n_new > 0 { (now, n_prev) } else { (self.tau, self.n_tau) };
        let masks = build_masks(n_t, n_tau, self.gamma, now - tau + 1)?;
        let padded = zero_pad(&self.c_hat, n_t)?;
        let (m1, m2, c) = (masks.m1.as_matrix(), masks.m2.as_matrix(), padded.as_matrix());
        let next = SymMatrix::from_upper_fn(n_t, |i, j| m1[(i, j)] * c[(i, j)] + m2[(i, j)] * (x[i] * x[j]));

        self.c_hat = next;
        self.t = now;
        self.tau = tau;
        self.n_tau = n_tau;
        Ok(&self.c_hat)
    }
}

/// `((t-1)/t) C + (1/t) x xᵀ`.
pub fn stationary_update(c: &SymMatrix, x: &[f64], t: u64) -> Result<SymMatrix> {
    check_sample(x, c.n())?;
    if t == 0 {
        return Err(param_err("time index must be at least 1"));
    }
    let tt = t as f64;
    let (keep, take) = ((tt - 1.0) / tt, 1.0 / tt);
    let m = c.as_matrix();
    Ok(SymMatrix::from_upper_fn(c.n(), |i, j| keep * m[(i, j)] + take * (x[i] * x[j])))
}

/// `γ C + (1-γ) x xᵀ`.
pub fn dynamic_update(c: &SymMatrix, x: &[f64], gamma: f64) -> Result<SymMatrix> {
    check_gamma(gamma)?;
    check_sample(x, c.n())?;
    let m = c.as_matrix();
    Ok(SymMatrix::from_upper_fn(c.n(), |i, j| gamma * m[(i, j)] + (1.0 - gamma) * (x[i] * x[j])))
}

/// Covariance rule driving an estimator. Each variant absorbs samples that may
/// carry new trailing coordinates.
#[derive(Clone, Debug)]
pub enum CovarianceModel {
    /// Masked expanding update.
    Expanding(CovarianceTracker),
    /// Exponential forgetting on the zero-padded previous estimate.
    Dynamic { cov: SymMatrix, gamma: f64 },
    /// Running mean of all zero-padded outer products so far.
    Stationary { cov: SymMatrix, t: u64 },
}

impl CovarianceModel {
    pub fn expanding(n0: usize, gamma: f64) -> Result<Self> {
        Ok(Self::Expanding(CovarianceTracker::with_zeros(n0, gamma)?))
    }

    pub fn dynamic(n0: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self::Dynamic { cov: SymMatrix::zeros(n0), gamma })
    }

    pub fn stationary(n0: usize) -> Self {
        Self::Stationary { cov: SymMatrix::zeros(n0), t: 0 }
    }

    pub fn covariance(&self) -> &SymMatrix {
        match self {
            Self::Expanding(tr) => tr.covariance(),
            Self::Dynamic { cov, .. } | Self::Stationary { cov, .. } => cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.covariance().n()
    }

    pub fn update(&mut self, x: &[f64], n_new: usize) -> Result<&SymMatrix> {
        match self {
            Self::Expanding(tr) => tr.expanding_update(x, n_new),
            Self::Dynamic { cov, gamma } => {
                let padded = zero_pad(cov, cov.n() + n_new)?;
                *cov = dynamic_update(&padded, x, *gamma)?;
                Ok(cov)
            }
            Self::Stationary { cov, t } => {
                let padded = zero_pad(cov, cov.n() + n_new)?;
                *cov = stationary_update(&padded, x, *t + 1)?;
                *t += 1;
                Ok(cov)
            }
        }
    }
}
