//! Problem data: partially observed matrix, side information, solver
//! hyperparameters, and synthetic instances with known ground truth.

mod io;
mod synthetic;

pub use io::{load_dense_csv, load_partial, load_side_info, save_dense_csv, save_partial, save_side_info};
pub use synthetic::generate_synthetic;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{LinearMap, Mat};
use crate::scalar::Real;

/// Observed entries `{A_ij : (i, j) ∈ Ω}` of an `n×m` matrix.
///
/// Indices are 0-based. Entries are kept in row-major order in a compressed
/// row layout, with a column-major copy for transposed products.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialMatrix<T> {
    n: usize,
    m: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_values: Vec<T>,
}

impl<T: Real> PartialMatrix<T> {
    /// Builds from 0-based `(i, j, value)` triples in any order.
    pub fn new(n: usize, m: usize, mut entries: Vec<(usize, usize, T)>) -> Result<Self> {
        for &(i, j, v) in &entries {
            if i >= n || j >= m {
                return Err(Error::param(format!("entry ({}, {}) outside {n}x{m}", i + 1, j + 1)));
            }
            if !v.is_finite() {
                return Err(Error::param(format!("entry ({}, {}) is not finite", i + 1, j + 1)));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::param(format!(
                "duplicate entry ({}, {})",
                w[0].0 + 1,
                w[0].1 + 1
            )));
        }
        Ok(Self::from_sorted(n, m, entries))
    }

    fn from_sorted(n: usize, m: usize, entries: Vec<(usize, usize, T)>) -> Self {
        let nnz = entries.len();
        let mut row_ptr = vec![0; n + 1];
        let mut col_ptr = vec![0; m + 1];
        for &(i, j, _) in &entries {
            row_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..m {
            col_ptr[j + 1] += col_ptr[j];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        // entries are row-major, so filling columns in this order leaves
        // each column's rows ascending
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0; nnz];
        let mut col_values = vec![T::zero(); nnz];
        for &(i, j, v) in &entries {
            row_idx[next[j]] = i;
            col_values[next[j]] = v;
            next[j] += 1;
        }
        PartialMatrix {
            n,
            m,
            row_ptr,
            col_idx,
            values,
            col_ptr,
            row_idx,
            col_values,
        }
    }

    /// Observes the entries of `a` for which `observed(i, j)` holds.
    pub fn from_dense(a: &Mat<T>, mut observed: impl FnMut(usize, usize) -> bool) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if observed(i, j) {
                    entries.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_sorted(a.nrows(), a.ncols(), entries)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(i, j, A_ij)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            self.col_idx[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Observed column indices and values in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Observed row indices and values in column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.col_values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|p| vals[p])
    }

    /// `A` with unobserved entries set to zero.
    pub fn to_dense_zero_filled(&self) -> Mat<T> {
        let mut a = Mat::zeros(self.n, self.m);
        for (i, j, v) in self.iter() {
            a[(i, j)] = v;
        }
        a
    }

    /// `Σ_Ω A_ij²`
    pub fn observed_sq_sum(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    /// `Σ_Ω (X_ij − A_ij)²` for a dense `X`.
    pub fn fit_residual(&self, x: &Mat<T>) -> T {
        self.iter()
            .map(|(i, j, v)| {
                let d = x[(i, j)] - v;
                d * d
            })
            .sum()
    }

    /// `Σ_Ω ((U Vᵀ)_ij − A_ij)²` without forming `U Vᵀ`.
    pub fn fit_residual_factored(&self, u: &Mat<T>, v: &Mat<T>) -> T {
        self.iter()
            .map(|(i, j, a)| {
                let d = crate::linalg::dot(u.row(i), v.row(j)) - a;
                d * d
            })
            .sum()
    }

    /// Rows with no observations.
    pub fn empty_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.row_ptr[i] == self.row_ptr[i + 1])
    }
}

impl<T: Real> LinearMap<T> for PartialMatrix<T> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.m
    }
    fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }
    fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        (0..self.m)
            .map(|j| {
                let (rows, vals) = self.col(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum()
            })
            .collect()
    }
    fn apply_block(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.m);
        let c = x.ncols();
        let mut out = Mat::zeros(self.n, c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice().par_chunks_mut(c).enumerate().for_each(|(i, orow)| {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &b) in orow.iter_mut().zip(x.row(j)) {
                    *o += v * b;
                }
            }
        });
        out
    }
    fn apply_transpose_block(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(x.nrows(), self.n);
        let c = x.ncols();
        let mut out = Mat::zeros(self.m, c);
        if c == 0 {
            return out;
        }
        out.as_mut_slice().par_chunks_mut(c).enumerate().for_each(|(j, orow)| {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                for (o, &b) in orow.iter_mut().zip(x.row(i)) {
                    *o += v * b;
                }
            }
        });
        out
    }
}

/// Fully observed side information `Y` (n×d).
#[derive(Clone, Debug, PartialEq)]
pub struct SideInfo<T>(Mat<T>);

impl<T: Real> SideInfo<T> {
    pub fn new(y: Mat<T>) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::param("side information contains non-finite values"));
        }
        Ok(SideInfo(y))
    }

    /// Checks that `Y` pairs with an `n`-row observation matrix.
    pub fn check_rows(&self, n: usize) -> Result<()> {
        if self.0.nrows() != n {
            return Err(Error::param(format!(
                "side information has {} rows, data has {n}",
                self.0.nrows()
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.0
    }

    pub fn into_inner(self) -> Mat<T> {
        self.0
    }
}

impl<T> std::ops::Deref for SideInfo<T> {
    type Target = Mat<T>;
    fn deref(&self) -> &Mat<T> {
        &self.0
    }
}

/// Solver settings shared by the ADMM engine and the baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams<T> {
    pub k: usize,
    pub lambda: T,
    pub gamma: T,
    pub rho1: T,
    pub rho2: T,
    pub eps: T,
    pub max_iters: usize,
    pub threads: usize,
    pub seed: u64,
}

/// Worker threads used when none are requested: available cores, at most 24.
pub fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(24)
}

impl<T: Real> Hyperparams<T> {
    pub fn new(k: usize) -> Self {
        Hyperparams {
            k,
            lambda: T::one(),
            gamma: T::one(),
            rho1: T::lit(10.0),
            rho2: T::lit(10.0),
            eps: T::lit(1e-6),
            max_iters: 20,
            threads: default_threads(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if self.k == 0 {
            return Err(Error::param("rank k must be at least 1"));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::param("lambda must be nonnegative"));
        }
        if !pos(self.gamma) {
            return Err(Error::param("gamma must be positive"));
        }
        if !pos(self.rho1) || !pos(self.rho2) {
            return Err(Error::param("rho1 and rho2 must be positive"));
        }
        if !pos(self.eps) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("iteration cap must be at least 1"));
        }
        if self.threads == 0 {
            return Err(Error::param("thread count must be at least 1"));
        }
        Ok(())
    }
}

/// The generating quantities of a synthetic instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth<T> {
    pub a_true: Mat<T>,
    pub beta: Mat<T>,
    pub noise_sigma: T,
}
