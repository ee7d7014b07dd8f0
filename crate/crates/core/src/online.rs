//! Online estimation over a growing node set.
//!
//! Each sample first updates the covariance, then the previous estimate is
//! zero-padded to the new side and refined by projected proximal gradient
//! steps, each blended with the running iterate by a weight `h`.

use crate::covariance::CovarianceModel;
use crate::error::{dim_err, param_err, Result};
use crate::matops::{soft_threshold, zero_pad, Spectrum, SymMatrix};

/// Smooth part of a topology-learning loss plus its constraint set.
pub trait SmoothLoss {
    /// Gradient of the smooth part at `s`. `anchor` is the previous estimate,
    /// at most as large as `s`.
    fn gradient(&self, s: &SymMatrix, cov: &SymMatrix, anchor: Option<&SymMatrix>) -> Result<SymMatrix>;

    /// Same as [`gradient`](Self::gradient), given the eigendecomposition of `s`.
    fn gradient_with_spectrum(
        &self,
        s: &SymMatrix,
        _spectrum: &Spectrum,
        cov: &SymMatrix,
        anchor: Option<&SymMatrix>,
    ) -> Result<SymMatrix> {
        self.gradient(s, cov, anchor)
    }

    /// Euclidean projection onto the feasible set.
    fn project(&self, s: &SymMatrix) -> Result<SymMatrix>;

    /// Projection that may also report the spectrum of its output.
    fn project_with_spectrum(&self, s: &SymMatrix) -> Result<(SymMatrix, Option<Spectrum>)> {
        Ok((self.project(s)?, None))
    }

    /// Largest step size with guaranteed descent.
    fn eta_max(&self) -> f64;

    /// ℓ1 weight.
    fn lambda(&self) -> f64;
}

/// `project(soft_threshold(s - eta * grad, eta * lambda))`.
pub fn ppg_step<L: SmoothLoss + ?Sized>(s: &SymMatrix, grad: &SymMatrix, eta: f64, loss: &L) -> Result<SymMatrix> {
    Ok(ppg_step_with_spectrum(s, grad, eta, loss)?.0)
}

fn ppg_step_with_spectrum<L: SmoothLoss + ?Sized>(
    s: &SymMatrix,
    grad: &SymMatrix,
    eta: f64,
    loss: &L,
) -> Result<(SymMatrix, Option<Spectrum>)> {
    if !(eta > 0.0) {
        return Err(param_err(format!("step size must be positive, got {eta}")));
    }
    if s.n() != grad.n() {
        return Err(dim_err(format!("iterate side {} vs gradient side {}", s.n(), grad.n())));
    }
    let z = soft_threshold(&(s - &grad.scaled(eta)), eta * loss.lambda())?;
    loss.project_with_spectrum(&z)
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(param_err(format!("h must lie in (0, 1], got {h}")));
    }
    Ok(())
}

/// `h * s_check + (1 - h) * prev`.
pub fn combine(s_check: &SymMatrix, prev: &SymMatrix, h: f64) -> Result<SymMatrix> {
    check_h(h)?;
    if s_check.n() != prev.n() {
        return Err(dim_err(format!("combine sides {} and {}", s_check.n(), prev.n())));
    }
    if h == 1.0 {
        return Ok(s_check.clone());
    }
    Ok(&s_check.scaled(h) + &prev.scaled(1.0 - h))
}

/// Blend weights for the block of previously present nodes and for the rows
/// and columns of newly arrived ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockWeights {
    pub old: f64,
    pub new: f64,
}

impl BlockWeights {
    pub fn uniform(h: f64) -> Result<Self> {
        Self::new(h, h)
    }

    pub fn new(old: f64, new: f64) -> Result<Self> {
        check_h(old)?;
        check_h(new)?;
        Ok(Self { old, new })
    }

    fn is_identity(&self) -> bool {
        self.old == 1.0 && self.new == 1.0
    }
}

/// Block-wise [`combine`]: entries inside the leading `n_old` block use
/// `w.old`, the rest use `w.new`.
pub fn combine_blocks(s_check: &SymMatrix, prev: &SymMatrix, n_old: usize, w: BlockWeights) -> Result<SymMatrix> {
    if w.old == w.new {
        return combine(s_check, prev, w.old);
    }
    if s_check.n() != prev.n() || n_old > prev.n() {
        return Err(dim_err(format!("combine sides {} and {} with old block {n_old}", s_check.n(), prev.n())));
    }
    let (a, b) = (s_check.as_matrix(), prev.as_matrix());
    Ok(SymMatrix::from_upper_fn(prev.n(), |i, j| {
        let h = if j < n_old { w.old } else { w.new };
        h * a[(i, j)] + (1.0 - h) * b[(i, j)]
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineOptions {
    pub eta: f64,
    pub weights: BlockWeights,
    pub iters_per_step: usize,
}

impl OnlineOptions {
    pub fn new(eta: f64, h: f64, iters_per_step: usize) -> Result<Self> {
        let opts = Self { eta, weights: BlockWeights::uniform(h)?, iters_per_step };
        opts.validate()?;
        Ok(opts)
    }

    fn validate(&self) -> Result<()> {
        check_h(self.weights.old)?;
        check_h(self.weights.new)?;
        if self.iters_per_step == 0 {
            return Err(param_err("iters_per_step must be at least 1"));
        }
        if !(self.eta > 0.0) {
            return Err(param_err(format!("step size must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Streaming estimator: covariance rule, loss and current estimate.
#[derive(Clone, Debug)]
pub struct OnlineLearner<L> {
    loss: L,
    cov: CovarianceModel,
    opts: OnlineOptions,
    s_hat: SymMatrix,
    // eigendecomposition of s_hat when known, saves one factorization per step
    spectrum: Option<Spectrum>,
    t: u64,
}

impl<L: SmoothLoss> OnlineLearner<L> {
    /// Starts from the zero estimate on the covariance's current side.
    pub fn new(loss: L, cov: CovarianceModel, opts: OnlineOptions) -> Result<Self> {
        let init = SymMatrix::zeros(cov.dim());
        Self::with_initial(loss, cov, opts, init)
    }

    pub fn with_initial(loss: L, cov: CovarianceModel, opts: OnlineOptions, init: SymMatrix) -> Result<Self> {
        opts.validate()?;
        if opts.eta > loss.eta_max() {
            return Err(param_err(format!(
                "step size must satisfy eta <= {} (epsilon^2), got {}",
                loss.eta_max(),
                opts.eta
            )));
        }
        if init.n() != cov.dim() {
            return Err(dim_err(format!("initial estimate side {} vs covariance side {}", init.n(), cov.dim())));
        }
        let s_hat = loss.project(&init)?;
        Ok(Self { loss, cov, opts, s_hat, spectrum: None, t: 0 })
    }

    pub fn estimate(&self) -> &SymMatrix {
        &self.s_hat
    }

    pub fn covariance(&self) -> &SymMatrix {
        self.cov.covariance()
    }

    pub fn covariance_model(&self) -> &CovarianceModel {
        &self.cov
    }

    pub fn loss(&self) -> &L {
        &self.loss
    }

    pub fn options(&self) -> &OnlineOptions {
        &self.opts
    }

    /// Number of samples absorbed.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.s_hat.n()
    }

    /// Absorbs sample `x`, whose last `n_new` coordinates belong to nodes
    /// arriving now, and returns the updated estimate.
    ///
    /// On error the learner is left unchanged.
    pub fn step(&mut self, x: &[f64], n_new: usize) -> Result<&SymMatrix> {
        let n_prev = self.s_hat.n();
        let n_t = n_prev + n_new;
        if x.len() != n_t {
            return Err(dim_err(format!("sample length {} but expected {n_prev} + {n_new}", x.len())));
        }
        let mut cov = self.cov.clone();
        cov.update(x, n_new)?;
        let (s_hat, spectrum) = self.refine(cov.covariance(), n_t)?;
        self.cov = cov;
        self.s_hat = s_hat;
        self.spectrum = spectrum;
        self.t += 1;
        Ok(&self.s_hat)
    }

    /// Runs the inner iterations against `cov` without touching the covariance
    /// rule, as if the covariance had stayed fixed for one more time step.
    pub fn step_fixed_covariance(&mut self) -> Result<&SymMatrix> {
        let cov = self.cov.covariance().clone();
        let (s_hat, spectrum) = self.refine(&cov, cov.n())?;
        self.s_hat = s_hat;
        self.spectrum = spectrum;
        self.t += 1;
        Ok(&self.s_hat)
    }

    fn refine(&self, cov: &SymMatrix, n_t: usize) -> Result<(SymMatrix, Option<Spectrum>)> {
        let anchor = &self.s_hat;
        let n_old = anchor.n();
        let mut iterate = zero_pad(anchor, n_t)?;
        let mut spectrum = match &self.spectrum {
            Some(s) => Some(s.padded(n_t)?),
            None => None,
        };
        for _ in 0..self.opts.iters_per_step {
            let grad = match &spectrum {
                Some(sp) => self.loss.gradient_with_spectrum(&iterate, sp, cov, Some(anchor))?,
                None => self.loss.gradient(&iterate, cov, Some(anchor))?,
            };
            let (check, check_spec) = ppg_step_with_spectrum(&iterate, &grad, self.opts.eta, &self.loss)?;
            if self.opts.weights.is_identity() {
                iterate = check;
                spectrum = check_spec;
            } else {
                iterate = combine_blocks(&check, &iterate, n_old, self.opts.weights)?;
                spectrum = None;
            }
        }
        Ok((iterate, spectrum))
    }
}
