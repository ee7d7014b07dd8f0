//! Gaussian graphical model loss.
//!
//! The estimate `S` is a precision-like graph-shift operator fitted by the
//! penalized log-likelihood
//!
//! ```text
//! tr(S C) - log det(S + eps I) + lambda ‖S‖₁ + alpha ‖[S]_old - S_prev‖²_F
//! ```
//!
//! over `{S ⪰ 0, eigenvalues ≤ sqrt(sigma)}`, where `[S]_old` is the block of
//! nodes already present at the previous time step.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Error, Result};
use crate::matops::{clip_spectrum, frob_dist, soft_threshold, zero_pad, Spectrum, SymMatrix};
use crate::online::SmoothLoss;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmrfParams {
    /// Determinant shift; `1/epsilon²` bounds the gradient's Lipschitz constant.
    pub epsilon: f64,
    /// Squared spectral-norm bound of the feasible set.
    pub sigma: f64,
    /// Weight of the temporal distance to the previous estimate.
    pub alpha: f64,
    /// Weight of the entry-wise ℓ1 penalty.
    pub lambda: f64,
}

impl GmrfParams {
    pub fn new(epsilon: f64, sigma: f64, alpha: f64, lambda: f64) -> Result<Self> {
        let p = Self { epsilon, sigma, alpha, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(param_err(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(param_err(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(param_err(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(param_err(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Largest admissible step size, `epsilon²`.
    pub fn eta_max(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// Upper end of the feasible eigenvalue interval.
    pub fn spectral_cap(&self) -> f64 {
        self.sigma.sqrt()
    }

    pub fn check_step(&self, eta: f64) -> Result<()> {
        if !(eta > 0.0) || eta > self.eta_max() {
            return Err(param_err(format!(
                "step size must satisfy 0 < eta <= epsilon^2 = {}, got {eta}",
                self.eta_max()
            )));
        }
        Ok(())
    }
}

fn check_anchor(s: &SymMatrix, anchor: Option<&SymMatrix>) -> Result<()> {
    if let Some(a) = anchor {
        if a.n() > s.n() {
            return Err(dim_err(format!("anchor side {} exceeds estimate side {}", a.n(), s.n())));
        }
    }
    Ok(())
}

/// `‖[S]_old - anchor‖²_F` over the leading block matching the anchor.
fn distance(s: &SymMatrix, anchor: &SymMatrix) -> f64 {
    let (a, m) = (anchor.as_matrix(), s.as_matrix());
    let k = anchor.n();
    let mut acc = 0.0;
    for j in 0..k {
        for i in 0..k {
            let d = m[(i, j)] - a[(i, j)];
            acc += d * d;
        }
    }
    acc
}

/// Zero-padded gradient of the distance term: `2 ([S]_old - anchor)` on the leading block.
fn distance_grad(s: &SymMatrix, anchor: &SymMatrix) -> SymMatrix {
    let (a, m) = (anchor.as_matrix(), s.as_matrix());
    let k = anchor.n();
    SymMatrix::from_upper_fn(s.n(), |i, j| if j < k { 2.0 * (m[(i, j)] - a[(i, j)]) } else { 0.0 })
}

/// `log det(S + eps I)` from the eigenvalues of `S`.
fn log_det_shifted(spec: &Spectrum, epsilon: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &v in spec.values.iter() {
        let shifted = v + epsilon;
        if !(shifted > 0.0) {
            return Err(Error::Domain(format!("det(S + eps I) is not positive: eigenvalue {shifted:e} after shift")));
        }
        acc += shifted.ln();
    }
    Ok(acc)
}

/// Smooth part `tr(S C) - log det(S + eps I) + alpha d(S)`.
pub fn smooth_objective(s: &SymMatrix, c_hat: &SymMatrix, anchor: Option<&SymMatrix>, p: &GmrfParams) -> Result<f64> {
    if s.n() != c_hat.n() {
        return Err(dim_err(format!("estimate side {} vs covariance side {}", s.n(), c_hat.n())));
    }
    check_anchor(s, anchor)?;
    let mut val = s.trace_product(c_hat)? - log_det_shifted(&s.spectrum()?, p.epsilon)?;
    if let Some(a) = anchor {
        val += p.alpha * distance(s, a);
    }
    Ok(val)
}

/// Full objective, smooth part plus `lambda ‖S‖₁`.
pub fn objective(s: &SymMatrix, c_hat: &SymMatrix, anchor: Option<&SymMatrix>, p: &GmrfParams) -> Result<f64> {
    Ok(smooth_objective(s, c_hat, anchor, p)? + p.lambda * s.l1_norm())
}

/// `C - (S + eps I)^{-1} + alpha ∇d(S)`.
pub fn smooth_grad(s: &SymMatrix, c_hat: &SymMatrix, anchor: Option<&SymMatrix>, p: &GmrfParams) -> Result<SymMatrix> {
    let spec = s.spectrum()?;
    grad_from_spectrum(s, &spec, c_hat, anchor, p)
}

/// Gradient reusing a known eigendecomposition of `s`.
pub fn grad_from_spectrum(
    s: &SymMatrix,
    spec: &Spectrum,
    c_hat: &SymMatrix,
    anchor: Option<&SymMatrix>,
    p: &GmrfParams,
) -> Result<SymMatrix> {
    if s.n() != c_hat.n() || spec.n() != s.n() {
        return Err(dim_err(format!(
            "estimate side {}, covariance side {}, spectrum side {}",
            s.n(),
            c_hat.n(),
            spec.n()
        )));
    }
    check_anchor(s, anchor)?;
    let min_shifted = spec.min() + p.epsilon;
    // relative to the largest shifted eigenvalue, below this the inverse is meaningless
    let floor = f64::EPSILON * (spec.max().abs() + p.epsilon);
    if !(min_shifted > floor) {
        return Err(Error::Numerical(format!("S + eps I is singular: minimum eigenvalue {min_shifted:e}")));
    }
    let inv = spec.reconstruct_with(|v| 1.0 / (v + p.epsilon));
    let mut g = c_hat - &inv;
    if let (Some(a), true) = (anchor, p.alpha > 0.0) {
        g = &g + &distance_grad(s, a).scaled(p.alpha);
    }
    Ok(g)
}

/// Projection onto `{S ⪰ 0, eigenvalues ≤ sqrt(sigma)}` by eigenvalue clipping.
pub fn project_feasible(s: &SymMatrix, sigma: f64) -> Result<SymMatrix> {
    Ok(project_with_spectrum(s, sigma)?.0)
}

/// Projection that also returns the eigendecomposition of its output.
pub fn project_with_spectrum(s: &SymMatrix, sigma: f64) -> Result<(SymMatrix, Spectrum)> {
    if !(sigma > 0.0) {
        return Err(param_err(format!("sigma must be positive, got {sigma}")));
    }
    clip_spectrum(s, 0.0, sigma.sqrt())
}

/// Returns true when `s` is feasible up to `tol` on both eigenvalue bounds.
pub fn is_feasible(s: &SymMatrix, sigma: f64, tol: f64) -> Result<bool> {
    let spec = s.spectrum()?;
    Ok(spec.min() >= -tol && spec.max() <= sigma.sqrt() + tol)
}

/// Loss adapter for the online engine.
#[derive(Clone, Copy, Debug)]
pub struct Gmrf {
    pub params: GmrfParams,
}

impl Gmrf {
    pub fn new(params: GmrfParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl SmoothLoss for Gmrf {
    fn gradient(&self, s: &SymMatrix, cov: &SymMatrix, anchor: Option<&SymMatrix>) -> Result<SymMatrix> {
        smooth_grad(s, cov, anchor, &self.params)
    }

    fn gradient_with_spectrum(
        &self,
        s: &SymMatrix,
        spectrum: &Spectrum,
        cov: &SymMatrix,
        anchor: Option<&SymMatrix>,
    ) -> Result<SymMatrix> {
        grad_from_spectrum(s, spectrum, cov, anchor, &self.params)
    }

    fn project(&self, s: &SymMatrix) -> Result<SymMatrix> {
        project_feasible(s, self.params.sigma)
    }

    fn project_with_spectrum(&self, s: &SymMatrix) -> Result<(SymMatrix, Option<Spectrum>)> {
        let (m, spec) = project_with_spectrum(s, self.params.sigma)?;
        Ok((m, Some(spec)))
    }

    fn eta_max(&self) -> f64 {
        self.params.eta_max()
    }

    fn lambda(&self) -> f64 {
        self.params.lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub eta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverOptions {
    /// High-precision settings for regret and contraction checks.
    pub fn oracle(eta: f64) -> Self {
        Self { eta, tol: 1e-10, max_iter: 50_000 }
    }

    /// Settings for baseline comparisons.
    pub fn baseline(eta: f64) -> Self {
        Self { eta, tol: 1e-6, max_iter: 2_000 }
    }
}

#[derive(Clone, Debug)]
pub struct OfflineSolution {
    pub s: SymMatrix,
    pub iterations: usize,
    /// Relative fixed-point residual of the last iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Starting point when no previous optimum is available: `diag(clip(1/(C_ii + eps)))`.
pub fn diagonal_guess(c_hat: &SymMatrix, p: &GmrfParams) -> SymMatrix {
    let cap = p.spectral_cap();
    let diag: Vec<f64> = (0..c_hat.n()).map(|i| (1.0 / (c_hat.get(i, i) + p.epsilon)).clamp(0.0, cap)).collect();
    SymMatrix::from_diagonal(&diag)
}

/// Solves the penalized problem for a fixed covariance by projected proximal
/// gradient iterations `S ← Π(T_{ηλ}(S - η∇f(S)))`.
///
/// `prev_opt` is the previous time step's optimum: it anchors the distance term
/// and, zero-padded, warm-starts the iterations. Without it `alpha` is ignored.
/// Hitting `max_iter` is reported through `converged`, not as an error.
pub fn offline_solve(
    c_hat: &SymMatrix,
    prev_opt: Option<&SymMatrix>,
    p: &GmrfParams,
    opts: &SolverOptions,
) -> Result<OfflineSolution> {
    p.validate()?;
    p.check_step(opts.eta)?;
    if !(opts.tol > 0.0) {
        return Err(param_err(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n = c_hat.n();
    let start = match prev_opt {
        Some(prev) => project_feasible(&zero_pad(prev, n)?, p.sigma)?,
        None => diagonal_guess(c_hat, p),
    };
    offline_solve_from(c_hat, prev_opt, start, p, opts)
}

/// [`offline_solve`] from an explicit starting point.
pub fn offline_solve_from(
    c_hat: &SymMatrix,
    prev_opt: Option<&SymMatrix>,
    start: SymMatrix,
    p: &GmrfParams,
    opts: &SolverOptions,
) -> Result<OfflineSolution> {
    p.check_step(opts.eta)?;
    if start.n() != c_hat.n() {
        return Err(dim_err(format!("start side {} vs covariance side {}", start.n(), c_hat.n())));
    }
    check_anchor(&start, prev_opt)?;
    let anchor = if p.alpha > 0.0 { prev_opt } else { None };
    let mut s = start;
    let mut spec = s.spectrum()?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let thr = opts.eta * p.lambda;
    while iterations < opts.max_iter {
        let g = grad_from_spectrum(&s, &spec, c_hat, anchor, p)?;
        let z = soft_threshold(&(&s - &g.scaled(opts.eta)), thr)?;
        let (next, next_spec) = project_with_spectrum(&z, p.sigma)?;
        residual = frob_dist(&next, &s)? / s.frobenius_norm().max(1.0);
        s = next;
        spec = next_spec;
        iterations += 1;
        if residual < opts.tol {
            break;
        }
    }
    Ok(OfflineSolution { s, iterations, residual, converged: residual < opts.tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(epsilon: f64, sigma: f64, alpha: f64, lambda: f64) -> GmrfParams {
        GmrfParams::new(epsilon, sigma, alpha, lambda).unwrap()
    }

    fn random_sym(n: usize, scale: f64, rng: &mut impl Rng) -> SymMatrix {
        SymMatrix::from_upper_fn(n, |_, _| rng.random_range(-scale..scale))
    }

    /// Random point of the feasible set with eigenvalues in `[0, cap]`.
    fn random_feasible(n: usize, cap: f64, rng: &mut impl Rng) -> SymMatrix {
        let spec = random_sym(n, 1.0, rng).spectrum().unwrap();
        let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..cap)).collect();
        let spec = Spectrum { values: nalgebra::DVector::from_vec(vals), vectors: spec.vectors };
        spec.reconstruct_with(|v| v)
    }

    /// Independent log-det: product of eigenvalues of the dense shifted matrix,
    /// with the eigen solver run on `S + eps I` directly.
    fn logdet_oracle(s: &SymMatrix, eps: f64) -> f64 {
        let shifted = s.shifted(eps);
        let eig = nalgebra::SymmetricEigen::new(shifted.as_matrix().clone());
        eig.eigenvalues.iter().product::<f64>().ln()
    }

    #[test]
    fn objective_closed_forms() {
        let p = params(0.1, 4.0, 0.0, 0.0);
        let v = objective(&SymMatrix::identity(2), &SymMatrix::identity(2), None, &p).unwrap();
        assert_relative_eq!(v, 2.0 - 2.0 * 1.1f64.ln(), max_relative = 1e-14);

        let p = params(1.0, 4.0, 0.0, 0.0);
        let c = SymMatrix::from_rows(&[&[3.7]]).unwrap();
        assert_eq!(objective(&SymMatrix::zeros(1), &c, None, &p).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_logdet_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let p = params(0.3, 10.0, 0.7, 0.2);
        for _ in 0..10 {
            let n = rng.random_range(2..8);
            let s = random_feasible(n, 3.0, &mut rng);
            let c = random_feasible(n, 2.0, &mut rng);
            let prev = random_sym(n - 1, 1.0, &mut rng);
            let mut want = 0.0;
            for i in 0..n {
                for j in 0..n {
                    want += s.get(i, j) * c.get(j, i) + p.lambda * s.get(i, j).abs();
                    if i < n - 1 && j < n - 1 {
                        want += p.alpha * (s.get(i, j) - prev.get(i, j)).powi(2);
                    }
                }
            }
            want -= logdet_oracle(&s, p.epsilon);
            let got = objective(&s, &c, Some(&prev), &p).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn objective_domain_error() {
        let p = params(0.1, 4.0, 0.0, 0.0);
        let s = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(objective(&s, &SymMatrix::identity(2), None, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_closed_form() {
        let p = params(1.0, 4.0, 0.0, 0.0);
        let g = smooth_grad(&SymMatrix::identity(3), &SymMatrix::identity(3), None, &p).unwrap();
        assert!(frob_dist(&g, &SymMatrix::identity(3).scaled(0.5)).unwrap() < 1e-14);
    }

    #[test]
    fn distance_gradient_vanishes_at_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_feasible(4, 2.0, &mut rng);
        let c = random_feasible(4, 2.0, &mut rng);
        let with = smooth_grad(&s, &c, Some(&s), &params(0.5, 4.0, 3.0, 0.0)).unwrap();
        let without = smooth_grad(&s, &c, None, &params(0.5, 4.0, 0.0, 0.0)).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn distance_gradient_touches_only_old_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s = random_feasible(5, 2.0, &mut rng);
        let c = random_feasible(5, 2.0, &mut rng);
        let prev = random_sym(3, 1.0, &mut rng);
        let with = smooth_grad(&s, &c, Some(&prev), &params(0.5, 4.0, 2.0, 0.0)).unwrap();
        let without = smooth_grad(&s, &c, None, &params(0.5, 4.0, 0.0, 0.0)).unwrap();
        let diff = &with - &without;
        for i in 0..5 {
            for j in 0..5 {
                if i >= 3 || j >= 3 {
                    assert_eq!(diff.get(i, j), 0.0);
                } else {
                    assert_relative_eq!(diff.get(i, j), 4.0 * (s.get(i, j) - prev.get(i, j)), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn singular_shift_is_reported() {
        let p = params(0.5, 4.0, 0.0, 0.0);
        let s = SymMatrix::from_diagonal(&[1.0, -0.5]);
        let err = smooth_grad(&s, &SymMatrix::identity(2), None, &p).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("minimum eigenvalue")));
    }

    #[test]
    fn projection_examples() {
        let s = SymMatrix::from_diagonal(&[5.0, -1.0]);
        let got = project_feasible(&s, 4.0).unwrap();
        assert!(frob_dist(&got, &SymMatrix::from_diagonal(&[2.0, 0.0])).unwrap() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random_feasible(6, 1.9, &mut rng);
        assert!(frob_dist(&project_feasible(&f, 4.0).unwrap(), &f).unwrap() < 1e-10);
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sigma = 4.0;
        for _ in 0..5 {
            let s = random_sym(5, 3.0, &mut rng);
            let proj = project_feasible(&s, sigma).unwrap();
            let d = frob_dist(&proj, &s).unwrap();
            for _ in 0..100 {
                let f = random_feasible(5, sigma.sqrt(), &mut rng);
                assert!(d <= frob_dist(&f, &s).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn projection_idempotent_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let sigma = 9.0;
        for _ in 0..50 {
            let n = rng.random_range(1..10);
            let s = random_sym(n, 6.0, &mut rng);
            let once = project_feasible(&s, sigma).unwrap();
            let twice = project_feasible(&once, sigma).unwrap();
            assert!(frob_dist(&once, &twice).unwrap() <= 1e-10);
            let spec = once.spectrum().unwrap();
            assert!(spec.min() >= -1e-10 && spec.max() <= 3.0 + 1e-10);
        }
    }

    #[test]
    fn offline_recovers_known_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let p = params(0.5, 9.0, 0.0, 0.0);
        let s0 = random_feasible(6, 2.5, &mut rng);
        let c = s0.shifted(p.epsilon).spectrum().unwrap().reconstruct_with(|v| 1.0 / v);
        let sol = offline_solve(&c, None, &p, &SolverOptions::oracle(p.eta_max())).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        let worst = (&sol.s - &s0).as_matrix().amax();
        assert!(worst <= 1e-6, "max deviation {worst}");
    }

    #[test]
    fn offline_large_lambda_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let p = params(0.5, 9.0, 0.0, 1e6);
        let c = random_feasible(4, 2.0, &mut rng);
        let sol = offline_solve(&c, None, &p, &SolverOptions::baseline(p.eta_max())).unwrap();
        assert_eq!(sol.s, SymMatrix::zeros(4));
    }

    #[test]
    fn offline_result_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let p = params(0.4, 16.0, 0.0, 0.05);
        let truth = random_feasible(10, 3.0, &mut rng).shifted(0.5);
        let c = truth.spectrum().unwrap().reconstruct_with(|v| 1.0 / v);
        let opts = SolverOptions::oracle(p.eta_max());
        let sol = offline_solve(&c, None, &p, &opts).unwrap();
        let g = smooth_grad(&sol.s, &c, None, &p).unwrap();
        let again =
            project_feasible(&soft_threshold(&(&sol.s - &g.scaled(opts.eta)), opts.eta * p.lambda).unwrap(), p.sigma)
                .unwrap();
        let res = frob_dist(&again, &sol.s).unwrap() / sol.s.frobenius_norm().max(1.0);
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn offline_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for &(alpha, lambda) in &[(0.0, 0.0), (0.0, 0.1), (0.3, 0.05)] {
            let p = params(0.5, 16.0, alpha, lambda);
            let n = 8;
            let c = random_feasible(n, 2.0, &mut rng).shifted(0.1);
            let prev = random_feasible(n - 2, 2.0, &mut rng);
            let anchor = if alpha > 0.0 { Some(&prev) } else { None };
            let mut s = diagonal_guess(&c, &p);
            let mut last = objective(&s, &c, anchor, &p).unwrap();
            for _ in 0..200 {
                let sol = offline_solve_from(
                    &c,
                    anchor,
                    s,
                    &p,
                    &SolverOptions { eta: p.eta_max(), tol: 1e-300, max_iter: 1 },
                )
                .unwrap();
                s = sol.s;
                let val = objective(&s, &c, anchor, &p).unwrap();
                assert!(val <= last + 1e-10, "alpha {alpha} lambda {lambda}: {val} > {last}");
                last = val;
            }
        }
    }

    /// Central differences along symmetric unit perturbations; an off-diagonal
    /// perturbation moves two entries, so it sees twice the gradient entry.
    fn fd_grad(s: &SymMatrix, c: &SymMatrix, anchor: Option<&SymMatrix>, p: &GmrfParams, h: f64) -> SymMatrix {
        let n = s.n();
        SymMatrix::from_upper_fn(n, |i, j| {
            let bump = |sign: f64| {
                let mut m = s.as_matrix().clone();
                m[(i, j)] += sign * h;
                if i != j {
                    m[(j, i)] += sign * h;
                }
                smooth_objective(&SymMatrix::new(m).unwrap(), c, anchor, p).unwrap()
            };
            let d = (bump(1.0) - bump(-1.0)) / (2.0 * h);
            if i == j {
                d
            } else {
                d / 2.0
            }
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for alpha in [0.0, 0.5] {
            let p = params(0.5, 9.0, alpha, 0.1);
            for n in [2, 5] {
                let s = random_feasible(n, 3.0, &mut rng);
                let c = random_feasible(n, 2.0, &mut rng);
                let prev = random_sym(n - 1, 1.0, &mut rng);
                let g = smooth_grad(&s, &c, Some(&prev), &p).unwrap();
                let fd = fd_grad(&s, &c, Some(&prev), &p, 1e-5);
                let scale = g.as_matrix().amax().max(1e-12);
                assert!((g.as_matrix() - fd.as_matrix()).amax() / scale < 1e-6);
            }
        }
    }

    #[test]
    fn midpoint_strong_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for (epsilon, sigma) in [(0.3, 10.0), (1.0, 400.0), (0.5, 4.0)] {
            let p = params(epsilon, sigma, 0.0, 0.0);
            for _ in 0..50 {
                let n = rng.random_range(2..7);
                let c = random_feasible(n, 2.0, &mut rng);
                let a = random_feasible(n, sigma.sqrt(), &mut rng);
                let b = random_feasible(n, sigma.sqrt(), &mut rng);
                let mid = (&a + &b).scaled(0.5);
                let f = |s: &SymMatrix| smooth_objective(s, &c, None, &p).unwrap();
                let gap = (f(&a) + f(&b)) / 2.0 - f(&mid);
                let d2 = frob_dist(&a, &b).unwrap().powi(2);
                assert!(gap + 1e-9 >= d2 / (8.0 * (sigma.sqrt() + epsilon).powi(2)));
            }
        }
    }

    #[test]
    fn inverse_sigma_modulus_fails_near_the_cap() {
        // curvature of -log(s + eps) at the cap is 1/(sqrt(sigma) + eps)^2 < 1/sigma
        let p = params(1.0, 400.0, 0.0, 0.0);
        let c = SymMatrix::zeros(1);
        let a = SymMatrix::from_diagonal(&[19.0]);
        let b = SymMatrix::from_diagonal(&[20.0]);
        let mid = SymMatrix::from_diagonal(&[19.5]);
        let f = |s: &SymMatrix| smooth_objective(s, &c, None, &p).unwrap();
        let gap = (f(&a) + f(&b)) / 2.0 - f(&mid);
        assert!(gap < 1.0 / (8.0 * 400.0));
        assert!(gap > 1.0 / (8.0 * 21.0f64.powi(2)));
    }

    #[test]
    fn offline_rejects_large_step() {
        let p = params(0.5, 9.0, 0.0, 0.0);
        let c = SymMatrix::identity(2);
        let opts = SolverOptions::baseline(0.3);
        assert!(matches!(offline_solve(&c, None, &p, &opts), Err(Error::Parameter(_))));
    }
}
