//! Compressed sparse row storage and a banded direct solver.

use num_complex::Complex;

use crate::error::{Result, SplitError};
use crate::scalar::Real;

/// Real sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[row]..self.indptr[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.row(row)
            .find(|&(c, _)| c == col)
            .map_or(T::zero(), |(_, v)| v)
    }

    /// `y = A x` for a complex vector.
    pub fn mul_complex_into(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[k]] * self.data[k];
            }
            *yr = acc;
        }
    }

    pub fn mul_complex(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.nrows];
        self.mul_complex_into(x, &mut y);
        y
    }

    pub fn mul_real(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.nrows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (_, v)| acc + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Row-major dense copy; intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (r, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        dense
    }

    /// Largest stored-entry count over all rows.
    pub fn max_row_nnz(&self) -> usize {
        self.indptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// (lower, upper) bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for r in 0..self.nrows {
            for (c, _) in self.row(r) {
                if c < r {
                    lower = lower.max(r - c);
                } else {
                    upper = upper.max(c - r);
                }
            }
        }
        (lower, upper)
    }
}

/// LU factorization of a square banded matrix without pivoting.
///
/// The Dirichlet diffusion matrices factored here are (weakly) diagonally
/// dominant, so no pivoting is needed; small pivots are reported as
/// [`SplitError::SingularOperator`].
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major band storage: row `i`, column `j` lives at
    /// `i * width + (j + lower - i)` with `width = lower + upper + 1`.
    band: Vec<T>,
    condition: T,
}

impl<T: Real> BandedLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(SplitError::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        let (lower, upper) = a.bandwidth();
        let width = lower + upper + 1;
        let mut band = vec![T::zero(); n * width];
        for r in 0..n {
            for (c, v) in a.row(r) {
                band[r * width + (c + lower - r)] = v;
            }
        }
        let scale = a.norm_inf().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        let mut pivot_max = T::zero();
        let mut pivot_min = T::infinity();
        for k in 0..n {
            let pivot = band[k * width + lower];
            let magnitude = pivot.abs();
            pivot_max = pivot_max.max(magnitude);
            pivot_min = pivot_min.min(magnitude);
            if magnitude <= tiny {
                return Err(SplitError::SingularOperator {
                    row: k,
                    pivot: magnitude.to_f64().unwrap_or(0.0),
                    condition: (pivot_max / magnitude.max(T::min_positive_value()))
                        .to_f64()
                        .unwrap_or(f64::INFINITY),
                });
            }
            let last_row = (k + lower).min(n - 1);
            let last_col = (k + upper).min(n - 1);
            for i in (k + 1)..=last_row {
                let lik = band[i * width + (k + lower - i)] / pivot;
                band[i * width + (k + lower - i)] = lik;
                if lik == T::zero() {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let ukj = band[k * width + (j + lower - k)];
                    band[i * width + (j + lower - i)] -= lik * ukj;
                }
            }
        }
        let condition = scale / pivot_min.max(T::min_positive_value())
            * (pivot_max / pivot_min.max(T::min_positive_value()));
        if condition.to_f64().unwrap_or(f64::INFINITY) * T::epsilon().to_f64().unwrap_or(0.0) > 1.0
        {
            return Err(SplitError::SingularOperator {
                row: n,
                pivot: pivot_min.to_f64().unwrap_or(0.0),
                condition: condition.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        Ok(Self {
            n,
            lower,
            upper,
            band,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Crude condition estimate from the pivot spread.
    pub fn condition_estimate(&self) -> T {
        self.condition
    }

    /// Solves `A x = b` in place for a complex right-hand side.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        assert_eq!(b.len(), self.n);
        let width = self.lower + self.upper + 1;
        for i in 0..self.n {
            let first = i.saturating_sub(self.lower);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(i).skip(first) {
                acc -= *bj * self.band[i * width + (j + self.lower - i)];
            }
            b[i] = acc;
        }
        for i in (0..self.n).rev() {
            let last = (i + self.upper).min(self.n - 1);
            let mut acc = b[i];
            for (j, bj) in b.iter().enumerate().take(last + 1).skip(i + 1) {
                acc -= *bj * self.band[i * width + (j + self.lower - i)];
            }
            b[i] = acc / self.band[i * width + self.lower];
        }
    }
}
