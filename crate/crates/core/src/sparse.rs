//! Compressed-row linear operators. Every stencil in the crate is
//! assembled once from `(row, col, coef)` triplets, so its transpose is
//! available exactly and the tangent/adjoint solvers stay consistent.

use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SparseOp<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    coefs: Vec<T>,
}

impl<T: Real> SparseOp<T> {
    /// Assembles from triplets; duplicate entries are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut coefs: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *coefs.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            coefs.push(v);
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            coefs,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.coefs.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.coefs[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// `y = A^T x`
    pub fn apply_t(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == T::zero() {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.coefs[k] * xr;
            }
        }
        y
    }

    /// Row-sum of absolute coefficients, an upper bound on the operator
    /// infinity-norm.
    pub fn max_abs_row_sum(&self) -> T {
        (0..self.nrows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| self.coefs[k].abs())
                    .sum::<T>()
            })
            .fold(T::zero(), |m, s| m.max(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_sum_and_transpose() {
        let a = SparseOp::from_triplets(2, 3, vec![(0, 1, 2.0), (1, 0, 1.0), (0, 1, 3.0), (1, 2, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![5.0, 0.0]);
        assert_eq!(a.apply_t(&[1.0, 2.0]), vec![2.0, 5.0, -2.0]);
    }
}
