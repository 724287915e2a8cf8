//! Small dense matrices and vectors, a partial-pivoting solver, truncated
//! Neumann sums and power iteration.
//!
//! Everything here is sized for models with at most a few hundred states.

use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivot magnitude below which [`solve_linear`] reports a singular system.
pub const SINGULAR_PIVOT: f64 = 1e-12;

/// Iteration count used by [`spectral_radius_estimate`] callers in this crate.
pub const POWER_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { entries: vec![T::zero(); dim] }
    }

    pub fn ones(dim: usize) -> Self {
        Self { entries: vec![T::one(); dim] }
    }

    /// Indicator of coordinate `i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[i] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<T> {
        self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }

    pub fn sum(&self) -> T {
        self.entries.iter().copied().sum()
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries.iter().zip(&other.entries).map(|(&a, &b)| a * b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn scale(&mut self, k: T) {
        for x in &mut self.entries {
            *x *= k;
        }
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(entries: Vec<T>) -> Self {
        Self { entries }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.entries[i]
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, x.dim());
        (0..self.rows).map(|i| self.row(i).iter().zip(x.iter()).map(|(&a, &b)| a * b).sum()).collect::<Vec<T>>().into()
    }

    /// `xᵀ A`, written into `out`.
    pub fn vec_mul_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(self.rows, x.len());
        debug_assert_eq!(self.cols, out.len());
        out.iter_mut().for_each(|o| *o = T::zero());
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
    }

    /// `xᵀ A`.
    pub fn vec_mul(&self, x: &Vector<T>) -> Vector<T> {
        let mut out = vec![T::zero(); self.cols];
        self.vec_mul_into(x.as_slice(), &mut out);
        out.into()
    }

    pub fn row_sums(&self) -> Vector<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect::<Vec<T>>().into()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>()).fold(T::zero(), T::max)
    }

    pub fn abs(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|x| x.abs()).collect() }
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch("matrix sum".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    /// `I − self`.
    pub fn identity_minus(&self) -> Self {
        let mut m = self.clone();
        m.entries.iter_mut().for_each(|x| *x = -*x);
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += T::one();
        }
        m
    }

    /// Submatrix on the given rows and columns (same index list for both).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut m = Self::zeros(keep.len(), keep.len());
        for (i, &r) in keep.iter().enumerate() {
            for (j, &c) in keep.iter().enumerate() {
                m[(i, j)] = self[(r, c)];
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.entries[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.entries[i * self.cols + j]
    }
}

/// Solves `A y = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    let n = a.rows();
    if !a.is_square() || b.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.dim()
        )));
    }
    let tiny = T::lit(SINGULAR_PIVOT);
    let mut m = a.clone();
    let mut y = b.clone();
    for k in 0..n {
        let (p, pivot) =
            (k..n)
                .map(|i| (i, m[(i, k)].abs()))
                .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot >= tiny) {
            return Err(Error::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
            y.as_mut_slice().swap(k, p);
        }
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == T::zero() {
                continue;
            }
            m[(i, k)] = T::zero();
            for j in k + 1..n {
                let mkj = m[(k, j)];
                m[(i, j)] -= f * mkj;
            }
            let yk = y[k];
            y[i] -= f * yk;
        }
    }
    for k in (0..n).rev() {
        let s: T = (k + 1..n).map(|j| m[(k, j)] * y[j]).sum();
        y[k] = (y[k] - s) / m[(k, k)];
    }
    Ok(y)
}

/// `(Σ_{k=0}^{K} Pᵏ) t`, by `K` Horner passes `y ← t + P y`.
pub fn neumann_partial_sum<T: Scalar>(p: &Matrix<T>, t: &Vector<T>, k: usize) -> Result<Vector<T>> {
    if !p.is_square() || p.rows() != t.dim() {
        return Err(Error::DimensionMismatch("neumann sum".into()));
    }
    let mut y = t.clone();
    for _ in 0..k {
        let py = p.mul_vec(&y);
        y = py.iter().zip(t.iter()).map(|(&a, &b)| a + b).collect::<Vec<T>>().into();
    }
    Ok(y)
}

/// Power-iteration estimate of the spectral radius of `|P|` together with the
/// row-sum bound ρ ≤ ‖P‖∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate<T> {
    pub estimate: T,
    pub inf_norm_bound: T,
}

/// Estimates ρ(|P|) from the growth rate of ‖|P|ᵏ x‖∞ over the second half of
/// `iters` iterations, starting from a fixed pseudo-random positive vector.
///
/// Measuring growth over a window instead of a single step keeps the
/// estimate stable on periodic matrices. The estimate is capped by the
/// ∞-norm bound.
pub fn spectral_radius_estimate<T: Scalar>(p: &Matrix<T>, iters: usize) -> Result<SpectralEstimate<T>> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch("spectral radius of a non-square matrix".into()));
    }
    let a = p.abs();
    let bound = a.inf_norm();
    let n = a.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vector<T> = (0..n).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect::<Vec<T>>().into();
    let iters = iters.max(2);
    let half = iters / 2;
    // log of the accumulated norm of |P|^k x
    let mut log_growth = T::zero();
    let mut log_at_half = T::zero();
    for k in 1..=iters {
        x = a.mul_vec(&x);
        let norm = x.max_abs();
        if norm == T::zero() || !norm.is_finite() {
            return Ok(SpectralEstimate { estimate: T::zero(), inf_norm_bound: bound });
        }
        x.scale(T::one() / norm);
        log_growth += norm.ln();
        if k == half {
            log_at_half = log_growth;
        }
    }
    let window = T::from_usize_lossy(iters - half);
    let estimate = ((log_growth - log_at_half) / window).exp().min(bound);
    Ok(SpectralEstimate { estimate, inf_norm_bound: bound })
}
