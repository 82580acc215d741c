//! Rectangular cell-centered grid with a MAC (staggered) velocity layout.
//!
//! Scalars live at cell centers `((i+1/2)hx, (j+1/2)hy)`. The x-velocity
//! lives on vertical faces `(i hx, (j+1/2)hy)` for `i in 0..=nx`, the
//! y-velocity on horizontal faces `((i+1/2)hx, j hy)` for `j in 0..=ny`.
//! All arrays are row-major with `y` as the outer index.

use crate::error::{ChnsError, Result};
use crate::scalar::{count, lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D<T> {
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
}

/// Builds a grid, rejecting fewer than 3 cells per direction or
/// nonpositive lengths.
pub fn make_grid<T: Real>(nx: usize, ny: usize, lx: T, ly: T) -> Result<Grid2D<T>> {
    Grid2D::new(nx, ny, lx, ly)
}

impl<T: Real> Grid2D<T> {
    pub fn new(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(ChnsError::InvalidGrid(format!(
                "need at least 3 cells per direction, got {nx}x{ny}"
            )));
        }
        if !(lx > T::zero() && ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(ChnsError::InvalidGrid(format!(
                "domain lengths must be positive and finite, got Lx={lx}, Ly={ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> T {
        self.lx
    }
    pub fn ly(&self) -> T {
        self.ly
    }
    pub fn hx(&self) -> T {
        self.lx / count(self.nx)
    }
    pub fn hy(&self) -> T {
        self.ly / count(self.ny)
    }
    pub fn h_max(&self) -> T {
        self.hx().max(self.hy())
    }
    pub fn h_min(&self) -> T {
        self.hx().min(self.hy())
    }
    /// Area of one cell; also the control volume of every face and corner.
    pub fn cell_area(&self) -> T {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> T {
        self.lx * self.ly
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
    pub fn n_faces(&self) -> usize {
        self.n_xfaces() + self.n_yfaces()
    }
    pub fn n_corners(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    /// Index of x-face `(i, j)` in a concatenated `[x | y]` face vector.
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    /// Index of y-face `(i, j)` in a concatenated `[x | y]` face vector.
    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        self.n_xfaces() + j * self.nx + i
    }
    #[inline]
    pub fn corner(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// True when face `idx` carries a wall-normal velocity component.
    pub fn is_boundary_face(&self, idx: usize) -> bool {
        if idx < self.n_xfaces() {
            let i = idx % (self.nx + 1);
            i == 0 || i == self.nx
        } else {
            let j = (idx - self.n_xfaces()) / self.nx;
            j == 0 || j == self.ny
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (T, T) {
        let half = lit::<T>(0.5);
        ((count::<T>(i) + half) * self.hx(), (count::<T>(j) + half) * self.hy())
    }
    pub fn xface_center(&self, i: usize, j: usize) -> (T, T) {
        (count::<T>(i) * self.hx(), (count::<T>(j) + lit(0.5)) * self.hy())
    }
    pub fn yface_center(&self, i: usize, j: usize) -> (T, T) {
        ((count::<T>(i) + lit(0.5)) * self.hx(), count::<T>(j) * self.hy())
    }

    /// Grid with the roles of x and y exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            nx: self.ny,
            ny: self.nx,
            lx: self.ly,
            ly: self.lx,
        }
    }

    pub fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny || self.lx != other.lx || self.ly != other.ly {
            return Err(ChnsError::GridMismatch(format!(
                "{what}: {}x{} on [{}, {}] vs {}x{} on [{}, {}]",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Grid2D<U> {
        Grid2D {
            nx: self.nx,
            ny: self.ny,
            lx: U::from(self.lx).expect("cast"),
            ly: U::from(self.ly).expect("cast"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing() {
        let g = make_grid(4, 4, 1.0f64, 1.0).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.hy(), 0.25);
        let g = make_grid(3, 8, 1.0f64, 2.0).unwrap();
        assert!((g.hx() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.hy(), 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_grid(2, 4, 1.0, 1.0).is_err());
        assert!(make_grid(4, 4, 0.0, 1.0).is_err());
        assert!(make_grid(4, 4, 1.0, -1.0).is_err());
    }

    #[test]
    fn face_bookkeeping() {
        let g = make_grid(4, 3, 1.0, 1.0).unwrap();
        assert_eq!(g.n_faces(), 5 * 3 + 4 * 4);
        assert!(g.is_boundary_face(g.xface(0, 1)));
        assert!(g.is_boundary_face(g.xface(4, 2)));
        assert!(!g.is_boundary_face(g.xface(2, 2)));
        assert!(g.is_boundary_face(g.yface(1, 0)));
        assert!(g.is_boundary_face(g.yface(3, 3)));
        assert!(!g.is_boundary_face(g.yface(3, 1)));
    }
}
