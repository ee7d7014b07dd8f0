//! Dense symmetric-matrix primitives.
//!
//! Everything in the crate that represents a graph-shift operator, a covariance
//! estimate or a mask goes through [`SymMatrix`]. Graphs handled here have at most
//! a few hundred nodes, so storage is a plain dense `nalgebra::DMatrix<f64>`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, param_err, Error, Result};

/// Absolute symmetry tolerance, scaled by `max(1, max|entry|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A real symmetric matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", self.m)
    }
}

impl SymMatrix {
    /// Wraps `m`, checking that it is square, finite and symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(dim_err(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { m })
    }

    /// Caller guarantees symmetry and finiteness.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self { m }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self { m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
    }

    /// Builds a matrix from row slices. Rows must form a symmetric square matrix.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(dim_err("rows do not form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Fills the upper triangle from `f(i, j)` with `i <= j` and mirrors it.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    /// `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        Self::from_upper_fn(x.len(), |i, j| x[i] * x[j])
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Entry-wise absolute sum.
    pub fn l1_norm(&self) -> f64 {
        self.m.iter().map(|v| v.abs()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> Result<f64> {
        same_side(self, other)?;
        Ok(self.m.dot(&other.m))
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).amax()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { m: &self.m * k }
    }

    /// The leading `k x k` block.
    pub fn top_left(&self, k: usize) -> Result<Self> {
        if k > self.n() {
            return Err(dim_err(format!("block of side {k} requested from side {}", self.n())));
        }
        Ok(Self { m: self.m.view((0, 0), (k, k)).into_owned() })
    }

    /// Adds `v` to every diagonal entry.
    pub fn shifted(&self, v: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += v;
        }
        Self { m }
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::of(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.min())
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.max())
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }
}

fn same_side(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(dim_err(format!("sides differ: {} vs {}", a.n(), b.n())));
    }
    Ok(())
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    /// Panics when sides differ; use [`SymMatrix::checked_add`] on untrusted input.
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, k: f64) -> SymMatrix {
        self.scaled(k)
    }
}

impl SymMatrix {
    pub fn checked_add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_side(self, other)?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_side(self, other)?;
        Ok(self - other)
    }
}

/// Embeds `z` as the top-left block of a `j x j` zero matrix.
pub fn zero_pad(z: &SymMatrix, j: usize) -> Result<SymMatrix> {
    let i = z.n();
    if j < i {
        return Err(dim_err(format!("cannot pad a side-{i} matrix down to side {j}")));
    }
    if j == i {
        return Ok(z.clone());
    }
    let mut m = DMatrix::zeros(j, j);
    m.view_mut((0, 0), (i, i)).copy_from(&z.m);
    Ok(SymMatrix { m })
}

/// Entry-wise soft-thresholding `sign(z) * max(|z| - thr, 0)`.
pub fn soft_threshold(z: &SymMatrix, thr: f64) -> Result<SymMatrix> {
    if !(thr >= 0.0) || !thr.is_finite() {
        return Err(param_err(format!("threshold must be finite and nonnegative, got {thr}")));
    }
    if thr == 0.0 {
        return Ok(z.clone());
    }
    Ok(SymMatrix { m: z.m.map(|v| shrink(v, thr)) })
}

#[inline]
fn shrink(v: f64, thr: f64) -> f64 {
    let mag = v.abs() - thr;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// `(z + zᵀ) / 2`.
pub fn symmetrize(z: &DMatrix<f64>) -> Result<SymMatrix> {
    if !z.is_square() {
        return Err(dim_err(format!("cannot symmetrize a {}x{} matrix", z.nrows(), z.ncols())));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    Ok(SymMatrix::from_matrix_unchecked(symmetric_part(z)))
}

/// Symmetric part, written so that the result is bit-exactly symmetric.
fn symmetric_part(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        out[(j, j)] = z[(j, j)];
        for i in (j + 1)..n {
            let v = 0.5 * (z[(i, j)] + z[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `‖a - b‖_F`.
pub fn frob_dist(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_side(a, b)?;
    Ok(a.m.iter().zip(b.m.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Eigendecomposition `S = V diag(values) Vᵀ` of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(s: &SymMatrix) -> Result<Self> {
        let n = s.n();
        if n == 0 {
            return Ok(Self { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) });
        }
        let max_iter = 1000 + 64 * n;
        let eig = SymmetricEigen::try_new(s.m.clone(), f64::EPSILON, max_iter)
            .ok_or_else(|| Error::Numerical(format!("symmetric eigendecomposition did not converge (side {n})")))?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
        }
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        let prod = scaled * self.vectors.transpose();
        SymMatrix::from_matrix_unchecked(symmetric_part(&prod))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Spectrum {
        Spectrum { values: self.values.map(f), vectors: self.vectors.clone() }
    }

    /// Spectrum of `zero_pad(S, j)`: old eigenvectors padded with zeros plus
    /// canonical basis vectors with eigenvalue 0 for the new coordinates.
    pub fn padded(&self, j: usize) -> Result<Spectrum> {
        let i = self.n();
        if j < i {
            return Err(dim_err(format!("cannot pad a side-{i} spectrum down to side {j}")));
        }
        if j == i {
            return Ok(self.clone());
        }
        let mut vectors = DMatrix::zeros(j, j);
        vectors.view_mut((0, 0), (i, i)).copy_from(&self.vectors);
        for k in i..j {
            vectors[(k, k)] = 1.0;
        }
        let mut values = DVector::zeros(j);
        values.rows_mut(0, i).copy_from(&self.values);
        Ok(Spectrum { values, vectors })
    }
}

/// Clips the eigenvalues of `s` into `[lo, hi]`, returning the result and its spectrum.
pub fn clip_spectrum(s: &SymMatrix, lo: f64, hi: f64) -> Result<(SymMatrix, Spectrum)> {
    if !(lo <= hi) {
        return Err(param_err(format!("empty clipping interval [{lo}, {hi}]")));
    }
    let spec = s.spectrum()?;
    let clipped = spec.map_values(|v| v.clamp(lo, hi));
    Ok((clipped.reconstruct_with(|v| v), clipped))
}
