//! Separable eigen-decompositions of the constant-coefficient stencils.
//!
//! Each 1D basis holds the exact eigenvectors of a 3-point second
//! difference with a given boundary treatment; 2D operators are
//! diagonalized by applying two orthonormal basis matrices. Every output
//! entry is a fixed-order dot product, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::scalar::{count, lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    /// Cell-centered, zero-flux ghost reflection (DCT-II).
    NeumannCell,
    /// Node-centered with both end nodes pinned to zero (DST-I on the
    /// `n - 1` interior nodes).
    DirichletNode,
    /// Cell-centered with antisymmetric ghost reflection (DST-II).
    DirichletCell,
}

/// Orthonormal eigenbasis of the 1D second difference.
#[derive(Clone, Debug)]
pub struct Basis1D<T> {
    points: usize,
    /// Row-major `points x points`; row `k` is mode `k`.
    matrix: Vec<T>,
    /// Eigenvalues of `-D2` (nonnegative).
    eigenvalues: Vec<T>,
}

impl<T: Real> Basis1D<T> {
    /// Basis for `n` cells of width `h` with the given boundary treatment.
    pub fn new(kind: BasisKind, n: usize, h: T) -> Self {
        let pi = T::PI();
        let nt: T = count(n);
        let two = lit::<T>(2.0);
        let half = lit::<T>(0.5);
        let (points, modes): (usize, Vec<usize>) = match kind {
            BasisKind::NeumannCell => (n, (0..n).collect()),
            BasisKind::DirichletNode => (n - 1, (1..n).collect()),
            BasisKind::DirichletCell => (n, (1..=n).collect()),
        };
        let mut matrix = Vec::with_capacity(points * points);
        let mut eigenvalues = Vec::with_capacity(points);
        for &k in &modes {
            let kt: T = count(k);
            let theta = pi * kt / nt;
            let mut row: Vec<T> = (0..points)
                .map(|i| {
                    let it: T = count(i);
                    match kind {
                        BasisKind::NeumannCell => (theta * (it + half)).cos(),
                        BasisKind::DirichletNode => (theta * (it + T::one())).sin(),
                        BasisKind::DirichletCell => (theta * (it + half)).sin(),
                    }
                })
                .collect();
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
            matrix.extend(row);
            eigenvalues.push(two / (h * h) * (T::one() - theta.cos()));
        }
        Self {
            points,
            matrix,
            eigenvalues,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }
}

fn use_parallel() -> bool {
    rayon::current_thread_index().is_some()
}

/// Applies `By (x) Bx` (or its transpose) to a row-major `ny x nx` array.
fn separable<T: Real>(data: &[T], bx: &Basis1D<T>, by: &Basis1D<T>, inverse: bool) -> Vec<T> {
    let nx = bx.points;
    let ny = by.points;
    debug_assert_eq!(data.len(), nx * ny);
    let mx = &bx.matrix;
    let my = &by.matrix;
    // forward: c[k] = sum_i M[k][i] f[i]; inverse: f[i] = sum_k M[k][i] c[k]
    let coef = |m: &[T], n: usize, out: usize, inp: usize| {
        if inverse {
            m[inp * n + out]
        } else {
            m[out * n + inp]
        }
    };
    let mut tmp = vec![T::zero(); nx * ny];
    let row_pass = |(j, row): (usize, &mut [T])| {
        let src = &data[j * nx..(j + 1) * nx];
        for (k, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &v) in src.iter().enumerate() {
                acc += coef(mx, nx, k, i) * v;
            }
            *out = acc;
        }
    };
    if use_parallel() {
        tmp.par_chunks_mut(nx).enumerate().for_each(row_pass);
    } else {
        tmp.chunks_mut(nx).enumerate().for_each(row_pass);
    }
    let mut out = vec![T::zero(); nx * ny];
    let col_pass = |(k, row): (usize, &mut [T])| {
        for j in 0..ny {
            let c = coef(my, ny, k, j);
            if c == T::zero() {
                continue;
            }
            let src = &tmp[j * nx..(j + 1) * nx];
            for (o, &v) in row.iter_mut().zip(src) {
                *o += c * v;
            }
        }
    };
    if use_parallel() {
        out.par_chunks_mut(nx).enumerate().for_each(col_pass);
    } else {
        out.chunks_mut(nx).enumerate().for_each(col_pass);
    }
    out
}

/// A 2D separable eigenbasis: `Lambda(kx, ky) = lx[kx] + ly[ky]`.
#[derive(Clone, Debug)]
pub struct Basis2D<T> {
    bx: Basis1D<T>,
    by: Basis1D<T>,
}

impl<T: Real> Basis2D<T> {
    pub fn new(bx: Basis1D<T>, by: Basis1D<T>) -> Self {
        Self { bx, by }
    }
    pub fn len(&self) -> usize {
        self.bx.points * self.by.points
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Solves `g(Lambda) x = rhs` mode by mode. Modes where `g` returns
    /// `None` are set to zero.
    pub fn solve_diagonal(&self, rhs: &[T], g: impl Fn(T) -> Option<T>) -> Vec<T> {
        let mut c = separable(rhs, &self.bx, &self.by, false);
        let nx = self.bx.points;
        for (ky, &ly) in self.by.eigenvalues.iter().enumerate() {
            for (kx, &lx) in self.bx.eigenvalues.iter().enumerate() {
                let k = ky * nx + kx;
                c[k] = match g(lx + ly) {
                    Some(d) => c[k] / d,
                    None => T::zero(),
                };
            }
        }
        separable(&c, &self.bx, &self.by, true)
    }

    pub fn forward(&self, f: &[T]) -> Vec<T> {
        separable(f, &self.bx, &self.by, false)
    }
    pub fn inverse(&self, c: &[T]) -> Vec<T> {
        separable(c, &self.bx, &self.by, true)
    }
    pub fn eigenvalue(&self, kx: usize, ky: usize) -> T {
        self.bx.eigenvalues[kx] + self.by.eigenvalues[ky]
    }
}
