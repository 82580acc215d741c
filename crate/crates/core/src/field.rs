//! Cell-centered scalar fields, staggered face vector fields and
//! observation points.

use crate::error::{ChnsError, Result};
use crate::grid::Grid2D;
use crate::scalar::{lit, Real};

/// Scalar values at cell centers, row-major with `y` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
}

/// Velocity-like field on MAC faces: x-components on vertical faces
/// followed by y-components on horizontal faces.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceVectorField<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
}

macro_rules! shared_vector_ops {
    ($ty:ident) => {
        impl<T: Real> $ty<T> {
            pub fn grid(&self) -> &Grid2D<T> {
                &self.grid
            }
            pub fn values(&self) -> &[T] {
                &self.values
            }
            pub fn values_mut(&mut self) -> &mut [T] {
                &mut self.values
            }
            pub fn into_values(self) -> Vec<T> {
                self.values
            }
            pub fn len(&self) -> usize {
                self.values.len()
            }
            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            /// Inner product weighted by the cell (control volume) area.
            pub fn dot(&self, other: &Self) -> T {
                debug_assert_eq!(self.values.len(), other.values.len());
                let s: T = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum();
                s * self.grid.cell_area()
            }
            pub fn norm(&self) -> T {
                self.dot(self).sqrt()
            }
            /// Plain Euclidean norm of the value array.
            pub fn norm_euclid(&self) -> T {
                self.values.iter().map(|&a| a * a).sum::<T>().sqrt()
            }
            pub fn max_abs(&self) -> T {
                self.values.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
            }
            pub fn all_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }

            pub fn scale(&mut self, a: T) {
                self.values.iter_mut().for_each(|v| *v *= a);
            }
            pub fn scaled(&self, a: T) -> Self {
                let mut out = self.clone();
                out.scale(a);
                out
            }
            /// `self += a * x`
            pub fn axpy(&mut self, a: T, x: &Self) {
                debug_assert_eq!(self.values.len(), x.values.len());
                for (y, &xv) in self.values.iter_mut().zip(&x.values) {
                    *y += a * xv;
                }
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
            /// Pointwise product.
            pub fn mul(&self, other: &Self) -> Self {
                let values = self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(&a, &b)| a * b)
                    .collect();
                Self {
                    grid: self.grid,
                    values,
                }
            }
            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                Self {
                    grid: self.grid,
                    values: self.values.iter().map(|&v| f(v)).collect(),
                }
            }
            pub fn fill(&mut self, v: T) {
                self.values.iter_mut().for_each(|x| *x = v);
            }

            pub fn cast<U: Real>(&self) -> $ty<U> {
                $ty {
                    grid: self.grid.cast(),
                    values: self.values.iter().map(|&v| U::from(v).expect("cast")).collect(),
                }
            }
        }
    };
}

shared_vector_ops!(ScalarField);
shared_vector_ops!(FaceVectorField);

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid2D<T>) -> Self {
        Self::constant(grid, T::zero())
    }
    pub fn constant(grid: &Grid2D<T>, c: T) -> Self {
        Self {
            grid: *grid,
            values: vec![c; grid.n_cells()],
        }
    }
    pub fn from_values(grid: &Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(ChnsError::GridMismatch(format!(
                "scalar field needs {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, values })
    }
    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: &Grid2D<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid: *grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.cell(i, j)]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.grid.cell(i, j);
        self.values[k] = v;
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_area()
    }
    pub fn mean(&self) -> T {
        self.integral() / self.grid.area()
    }
    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &a| m.min(a))
    }
    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &a| m.max(a))
    }
    pub fn remove_mean(&mut self) {
        let m = self.values.iter().copied().sum::<T>() / crate::scalar::count(self.values.len());
        self.values.iter_mut().for_each(|v| *v -= m);
    }

    /// Field on the transposed grid with `x` and `y` exchanged.
    pub fn transposed(&self) -> Self {
        let g = self.grid.transposed();
        let mut values = Vec::with_capacity(g.n_cells());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                values.push(self.at(j, i));
            }
        }
        Self { grid: g, values }
    }
}

impl<T: Real> FaceVectorField<T> {
    pub fn zeros(grid: &Grid2D<T>) -> Self {
        Self {
            grid: *grid,
            values: vec![T::zero(); grid.n_faces()],
        }
    }
    pub fn from_values(grid: &Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_faces() {
            return Err(ChnsError::GridMismatch(format!(
                "face field needs {} values, got {}",
                grid.n_faces(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, values })
    }
    pub fn from_parts(grid: &Grid2D<T>, xvals: Vec<T>, yvals: Vec<T>) -> Result<Self> {
        if xvals.len() != grid.n_xfaces() || yvals.len() != grid.n_yfaces() {
            return Err(ChnsError::GridMismatch(format!(
                "face blocks need {}+{} values, got {}+{}",
                grid.n_xfaces(),
                grid.n_yfaces(),
                xvals.len(),
                yvals.len()
            )));
        }
        let mut values = xvals;
        values.extend(yvals);
        Ok(Self { grid: *grid, values })
    }
    /// Samples `(fx, fy)` at face midpoints; wall-normal components are set
    /// to zero (no-slip).
    pub fn from_fns(grid: &Grid2D<T>, fx: impl Fn(T, T) -> T, fy: impl Fn(T, T) -> T) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 1..grid.nx() {
                let (x, y) = grid.xface_center(i, j);
                out.values[grid.xface(i, j)] = fx(x, y);
            }
        }
        for j in 1..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.yface_center(i, j);
                out.values[grid.yface(i, j)] = fy(x, y);
            }
        }
        out
    }

    pub fn xvals(&self) -> &[T] {
        &self.values[..self.grid.n_xfaces()]
    }
    pub fn yvals(&self) -> &[T] {
        &self.values[self.grid.n_xfaces()..]
    }
    #[inline]
    pub fn x_at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.xface(i, j)]
    }
    #[inline]
    pub fn y_at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.yface(i, j)]
    }

    /// Sets every wall-normal component to zero.
    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny() {
            self.values[g.xface(0, j)] = T::zero();
            self.values[g.xface(g.nx(), j)] = T::zero();
        }
        for i in 0..g.nx() {
            self.values[g.yface(i, 0)] = T::zero();
            self.values[g.yface(i, g.ny())] = T::zero();
        }
    }
    pub fn boundary_is_zero(&self) -> bool {
        (0..self.values.len())
            .filter(|&k| self.grid.is_boundary_face(k))
            .all(|k| self.values[k] == T::zero())
    }

    /// Field on the transposed grid: the x-block becomes the y-block.
    pub fn transposed(&self) -> Self {
        let g = self.grid;
        let t = g.transposed();
        let mut out = Self::zeros(&t);
        for j in 0..g.ny() {
            for i in 0..=g.nx() {
                out.values[t.yface(j, i)] = self.x_at(i, j);
            }
        }
        for j in 0..=g.ny() {
            for i in 0..g.nx() {
                out.values[t.xface(j, i)] = self.y_at(i, j);
            }
        }
        out
    }
}

/// Sensor location `x_i` strictly inside the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> ObservationPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn boundary_distance(&self, grid: &Grid2D<T>) -> T {
        self.x.min(grid.lx() - self.x).min(self.y).min(grid.ly() - self.y)
    }

    /// Requires a clearance of more than two cells from the boundary.
    pub fn validate(&self, grid: &Grid2D<T>) -> Result<()> {
        let d = self.boundary_distance(grid);
        if !(d > lit::<T>(2.0) * grid.h_max()) {
            return Err(ChnsError::Observation(format!(
                "point ({}, {}) lies within 2*max(hx,hy) = {} of the boundary",
                self.x,
                self.y,
                lit::<T>(2.0) * grid.h_max()
            )));
        }
        Ok(())
    }
}
