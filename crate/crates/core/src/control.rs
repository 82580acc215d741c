//! Piecewise-constant-in-time distributed controls.

use crate::error::{ChnsError, Result};
use crate::field::ScalarField;
use crate::grid::Grid2D;
use crate::scalar::Real;

/// One cell field per time step; `U^n` acts on the interval `[t_n, t_{n+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField<T> {
    grid: Grid2D<T>,
    dt: T,
    snapshots: Vec<ScalarField<T>>,
}

impl<T: Real> ControlField<T> {
    pub fn zeros(grid: &Grid2D<T>, dt: T, steps: usize) -> Self {
        Self {
            grid: *grid,
            dt,
            snapshots: vec![ScalarField::zeros(grid); steps],
        }
    }

    pub fn constant(grid: &Grid2D<T>, dt: T, steps: usize, c: T) -> Self {
        Self {
            grid: *grid,
            dt,
            snapshots: vec![ScalarField::constant(grid, c); steps],
        }
    }

    pub fn from_snapshots(grid: &Grid2D<T>, dt: T, snapshots: Vec<ScalarField<T>>) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(ChnsError::InvalidArgument(format!(
                "control dt must be positive, got {dt}"
            )));
        }
        for (n, s) in snapshots.iter().enumerate() {
            grid.ensure_same(s.grid(), "control snapshot")?;
            if !s.all_finite() {
                return Err(ChnsError::NonFinite {
                    field: "control",
                    step: n,
                });
            }
        }
        Ok(Self {
            grid: *grid,
            dt,
            snapshots,
        })
    }

    /// Samples `f(x, y, t_n)` at cell centers for each step.
    pub fn from_fn(grid: &Grid2D<T>, dt: T, steps: usize, f: impl Fn(T, T, T) -> T) -> Self {
        let snapshots = (0..steps)
            .map(|n| {
                let t = dt * crate::scalar::count::<T>(n);
                ScalarField::from_fn(grid, |x, y| f(x, y, t))
            })
            .collect();
        Self {
            grid: *grid,
            dt,
            snapshots,
        }
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.snapshots.len()
    }
    pub fn snapshots(&self) -> &[ScalarField<T>] {
        &self.snapshots
    }
    pub fn snapshots_mut(&mut self) -> &mut [ScalarField<T>] {
        &mut self.snapshots
    }
    pub fn at(&self, n: usize) -> &ScalarField<T> {
        &self.snapshots[n]
    }

    pub fn ensure_compatible(&self, other: &Self) -> Result<()> {
        self.grid.ensure_same(&other.grid, "control")?;
        if self.steps() != other.steps() || self.dt != other.dt {
            return Err(ChnsError::GridMismatch(format!(
                "control time grids differ: {} steps of {} vs {} steps of {}",
                self.steps(),
                self.dt,
                other.steps(),
                other.dt
            )));
        }
        Ok(())
    }

    /// `L^2(Q)` inner product with the left-rectangle rule in time.
    pub fn dot(&self, other: &Self) -> T {
        let s: T = self.snapshots.iter().zip(&other.snapshots).map(|(a, b)| a.dot(b)).sum();
        s * self.dt
    }
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }
    pub fn max_abs(&self) -> T {
        self.snapshots.iter().fold(T::zero(), |m, s| m.max(s.max_abs()))
    }

    pub fn axpy(&mut self, a: T, x: &Self) {
        for (s, xs) in self.snapshots.iter_mut().zip(&x.snapshots) {
            s.axpy(a, xs);
        }
    }
    pub fn scale(&mut self, a: T) {
        self.snapshots.iter_mut().for_each(|s| s.scale(a));
    }
    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }
    pub fn map(&self, f: impl Fn(T) -> T + Copy) -> Self {
        Self {
            grid: self.grid,
            dt: self.dt,
            snapshots: self.snapshots.iter().map(|s| s.map(f)).collect(),
        }
    }
    /// Space-time integral `sum_n dt * integral(U^n)`.
    pub fn integral(&self) -> T {
        self.snapshots.iter().map(|s| s.integral()).sum::<T>() * self.dt
    }
}
