//! MAC finite-difference operators with zero-flux scalar boundaries and
//! no-slip velocity boundaries, plus the fast constant-coefficient solves
//! used by the time steppers.
//!
//! Face-valued operators never read or write wall-normal faces, so every
//! face field produced here satisfies the no-slip condition exactly and
//! the transposes of the assembled operators are exact adjoints on the
//! no-slip subspace.

use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ObservationPoint, ScalarField};
use crate::grid::Grid2D;
use crate::scalar::{lit, to_f64, Real};
use crate::sparse::SparseOp;
use crate::spectral::{Basis1D, Basis2D, BasisKind};

/// Assembled stencils for one grid.
#[derive(Clone, Debug)]
pub struct Operators<T> {
    /// Neumann 5-point Laplacian on cells.
    pub lap: SparseOp<T>,
    /// Cell-to-face gradient (interior faces only).
    pub grad: SparseOp<T>,
    /// Face-to-cell divergence (reads every face).
    pub div: SparseOp<T>,
    /// Cell-to-face arithmetic average (interior faces only).
    pub avg: SparseOp<T>,
    /// Componentwise no-slip vector Laplacian on faces.
    pub vlap: SparseOp<T>,
    /// Centered derivative of each component along its own direction.
    pub d_normal: SparseOp<T>,
    /// Centered derivative of each component across its direction.
    pub d_cross: SparseOp<T>,
    /// Interpolation of the other component onto each face.
    pub interp_cross: SparseOp<T>,
    /// Symmetric-gradient components `[exx@cells, eyy@cells, exy@corners]`.
    pub strain: SparseOp<T>,
    /// Cell-to-corner average of the adjacent cells.
    pub corner_avg: SparseOp<T>,
    /// Quadrature weight of each strain component (`exy` counts twice,
    /// scaled by the corner's share of a cell area).
    pub strain_weight: Vec<T>,
}

impl<T: Real> Operators<T> {
    pub fn new(g: &Grid2D<T>) -> Self {
        let (nx, ny) = (g.nx(), g.ny());
        let (hx, hy) = (g.hx(), g.hy());
        let one = T::one();
        let half = lit::<T>(0.5);
        let quarter = lit::<T>(0.25);
        let two = lit::<T>(2.0);
        let ihx2 = one / (hx * hx);
        let ihy2 = one / (hy * hy);
        let nc = g.n_cells();
        let nf = g.n_faces();

        let mut t = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let r = g.cell(i, j);
                if i > 0 {
                    t.push((r, g.cell(i - 1, j), ihx2));
                    t.push((r, r, -ihx2));
                }
                if i + 1 < nx {
                    t.push((r, g.cell(i + 1, j), ihx2));
                    t.push((r, r, -ihx2));
                }
                if j > 0 {
                    t.push((r, g.cell(i, j - 1), ihy2));
                    t.push((r, r, -ihy2));
                }
                if j + 1 < ny {
                    t.push((r, g.cell(i, j + 1), ihy2));
                    t.push((r, r, -ihy2));
                }
            }
        }
        let lap = SparseOp::from_triplets(nc, nc, t);

        let mut tg = Vec::new();
        let mut ta = Vec::new();
        for j in 0..ny {
            for i in 1..nx {
                let r = g.xface(i, j);
                tg.push((r, g.cell(i, j), one / hx));
                tg.push((r, g.cell(i - 1, j), -one / hx));
                ta.push((r, g.cell(i, j), half));
                ta.push((r, g.cell(i - 1, j), half));
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let r = g.yface(i, j);
                tg.push((r, g.cell(i, j), one / hy));
                tg.push((r, g.cell(i, j - 1), -one / hy));
                ta.push((r, g.cell(i, j), half));
                ta.push((r, g.cell(i, j - 1), half));
            }
        }
        let grad = SparseOp::from_triplets(nf, nc, tg);
        let avg = SparseOp::from_triplets(nf, nc, ta);

        let mut td = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let r = g.cell(i, j);
                td.push((r, g.xface(i + 1, j), one / hx));
                td.push((r, g.xface(i, j), -one / hx));
                td.push((r, g.yface(i, j + 1), one / hy));
                td.push((r, g.yface(i, j), -one / hy));
            }
        }
        let div = SparseOp::from_triplets(nc, nf, td);

        // x-face (i, j) with signed neighbor offsets; ghost rows mirror with
        // a sign flip (no-slip for tangential components), wall-normal
        // faces are pinned to zero.
        let xref = |i: isize, j: isize| -> Option<(usize, T)> {
            if i <= 0 || i >= nx as isize {
                return None;
            }
            if j < 0 {
                Some((g.xface(i as usize, 0), -one))
            } else if j >= ny as isize {
                Some((g.xface(i as usize, ny - 1), -one))
            } else {
                Some((g.xface(i as usize, j as usize), one))
            }
        };
        let yref = |i: isize, j: isize| -> Option<(usize, T)> {
            if j <= 0 || j >= ny as isize {
                return None;
            }
            if i < 0 {
                Some((g.yface(0, j as usize), -one))
            } else if i >= nx as isize {
                Some((g.yface(nx - 1, j as usize), -one))
            } else {
                Some((g.yface(i as usize, j as usize), one))
            }
        };

        let mut tv = Vec::new();
        let mut tn = Vec::new();
        let mut tc = Vec::new();
        let mut ti = Vec::new();
        let inv2hx = one / (two * hx);
        let inv2hy = one / (two * hy);
        for j in 0..ny as isize {
            for i in 1..nx as isize {
                let r = g.xface(i as usize, j as usize);
                for (di, dj, c) in [(1, 0, ihx2), (-1, 0, ihx2), (0, 1, ihy2), (0, -1, ihy2)] {
                    if let Some((k, s)) = xref(i + di, j + dj) {
                        tv.push((r, k, s * c));
                    }
                }
                tv.push((r, r, -two * (ihx2 + ihy2)));
                for (di, c) in [(1, inv2hx), (-1, -inv2hx)] {
                    if let Some((k, s)) = xref(i + di, j) {
                        tn.push((r, k, s * c));
                    }
                }
                for (dj, c) in [(1, inv2hy), (-1, -inv2hy)] {
                    if let Some((k, s)) = xref(i, j + dj) {
                        tc.push((r, k, s * c));
                    }
                }
                for (ii, jj) in [(i - 1, j), (i, j), (i - 1, j + 1), (i, j + 1)] {
                    if let Some((k, s)) = yref(ii, jj) {
                        ti.push((r, k, s * quarter));
                    }
                }
            }
        }
        for j in 1..ny as isize {
            for i in 0..nx as isize {
                let r = g.yface(i as usize, j as usize);
                for (di, dj, c) in [(1, 0, ihx2), (-1, 0, ihx2), (0, 1, ihy2), (0, -1, ihy2)] {
                    if let Some((k, s)) = yref(i + di, j + dj) {
                        tv.push((r, k, s * c));
                    }
                }
                tv.push((r, r, -two * (ihx2 + ihy2)));
                for (dj, c) in [(1, inv2hy), (-1, -inv2hy)] {
                    if let Some((k, s)) = yref(i, j + dj) {
                        tn.push((r, k, s * c));
                    }
                }
                for (di, c) in [(1, inv2hx), (-1, -inv2hx)] {
                    if let Some((k, s)) = yref(i + di, j) {
                        tc.push((r, k, s * c));
                    }
                }
                for (ii, jj) in [(i, j - 1), (i + 1, j - 1), (i, j), (i + 1, j)] {
                    if let Some((k, s)) = xref(ii, jj) {
                        ti.push((r, k, s * quarter));
                    }
                }
            }
        }
        let vlap = SparseOp::from_triplets(nf, nf, tv);
        let d_normal = SparseOp::from_triplets(nf, nf, tn);
        let d_cross = SparseOp::from_triplets(nf, nf, tc);
        let interp_cross = SparseOp::from_triplets(nf, nf, ti);

        let ncorner = g.n_corners();
        let mut ts = Vec::new();
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let r = g.cell(i as usize, j as usize);
                for (ii, c) in [(i + 1, one / hx), (i, -one / hx)] {
                    if let Some((k, s)) = xref(ii, j) {
                        ts.push((r, k, s * c));
                    }
                }
                for (jj, c) in [(j + 1, one / hy), (j, -one / hy)] {
                    if let Some((k, s)) = yref(i, jj) {
                        ts.push((nc + r, k, s * c));
                    }
                }
            }
        }
        for j in 0..=ny as isize {
            for i in 0..=nx as isize {
                let r = 2 * nc + g.corner(i as usize, j as usize);
                for (jj, c) in [(j, half / hy), (j - 1, -half / hy)] {
                    if let Some((k, s)) = xref(i, jj) {
                        ts.push((r, k, s * c));
                    }
                }
                for (ii, c) in [(i, half / hx), (i - 1, -half / hx)] {
                    if let Some((k, s)) = yref(ii, j) {
                        ts.push((r, k, s * c));
                    }
                }
            }
        }
        let strain = SparseOp::from_triplets(2 * nc + ncorner, nf, ts);

        let mut tk = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let cells: Vec<usize> = [
                    (i.wrapping_sub(1), j.wrapping_sub(1)),
                    (i, j.wrapping_sub(1)),
                    (i.wrapping_sub(1), j),
                    (i, j),
                ]
                .into_iter()
                .filter(|&(a, b)| a < nx && b < ny)
                .map(|(a, b)| g.cell(a, b))
                .collect();
                let w = one / crate::scalar::count::<T>(cells.len());
                for c in cells {
                    tk.push((g.corner(i, j), c, w));
                }
            }
        }
        let corner_avg = SparseOp::from_triplets(ncorner, nc, tk);
        // exy carries multiplicity 2 times the corner's share of a cell area
        let mut strain_weight = vec![one; 2 * nc];
        for j in 0..=ny {
            for i in 0..=nx {
                let mut w = two;
                if i == 0 || i == nx {
                    w *= half;
                }
                if j == 0 || j == ny {
                    w *= half;
                }
                strain_weight.push(w);
            }
        }

        Self {
            lap,
            grad,
            div,
            avg,
            vlap,
            d_normal,
            d_cross,
            interp_cross,
            strain,
            corner_avg,
            strain_weight,
        }
    }
}

/// Grid, assembled operators and spectral solvers for one problem size.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    grid: Grid2D<T>,
    ops: Operators<T>,
    cells: Basis2D<T>,
    xfaces: Basis2D<T>,
    yfaces: Basis2D<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(grid: &Grid2D<T>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        Self {
            grid: *grid,
            ops: Operators::new(grid),
            cells: Basis2D::new(
                Basis1D::new(BasisKind::NeumannCell, nx, hx),
                Basis1D::new(BasisKind::NeumannCell, ny, hy),
            ),
            xfaces: Basis2D::new(
                Basis1D::new(BasisKind::DirichletNode, nx, hx),
                Basis1D::new(BasisKind::DirichletCell, ny, hy),
            ),
            yfaces: Basis2D::new(
                Basis1D::new(BasisKind::DirichletCell, nx, hx),
                Basis1D::new(BasisKind::DirichletNode, ny, hy),
            ),
        }
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }
    pub fn ops(&self) -> &Operators<T> {
        &self.ops
    }

    pub(crate) fn cell_field(&self, v: Vec<T>) -> ScalarField<T> {
        ScalarField::from_values(&self.grid, v).expect("operator output length")
    }
    pub(crate) fn face_field(&self, v: Vec<T>) -> FaceVectorField<T> {
        FaceVectorField::from_values(&self.grid, v).expect("operator output length")
    }

    pub fn laplacian_neumann(&self, f: &ScalarField<T>) -> ScalarField<T> {
        self.cell_field(self.ops.lap.apply(f.values()))
    }
    pub fn grad_cc_to_face(&self, f: &ScalarField<T>) -> FaceVectorField<T> {
        self.face_field(self.ops.grad.apply(f.values()))
    }
    pub fn div_face_to_cc(&self, g: &FaceVectorField<T>) -> ScalarField<T> {
        self.cell_field(self.ops.div.apply(g.values()))
    }
    pub fn avg_cc_to_face(&self, f: &ScalarField<T>) -> FaceVectorField<T> {
        self.face_field(self.ops.avg.apply(f.values()))
    }
    pub fn vector_laplacian(&self, u: &FaceVectorField<T>) -> FaceVectorField<T> {
        self.face_field(self.ops.vlap.apply(u.values()))
    }

    /// Applies `a I + b (-Lap) + c Lap^2`.
    pub fn apply_modified_biharmonic(&self, a: T, b: T, c: T, x: &ScalarField<T>) -> ScalarField<T> {
        let lx = self.ops.lap.apply(x.values());
        let llx = self.ops.lap.apply(&lx);
        let v = x
            .values()
            .iter()
            .zip(lx.iter().zip(&llx))
            .map(|(&xi, (&l, &ll))| a * xi - b * l + c * ll)
            .collect();
        self.cell_field(v)
    }

    /// Solves `(a I + b (-Lap) + c Lap^2) x = rhs` with zero-flux
    /// boundaries for both `x` and `Lap x`.
    pub fn solve_modified_biharmonic(&self, a: T, b: T, c: T, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
        if !(a > T::zero()) {
            return Err(ChnsError::InvalidArgument(format!(
                "modified biharmonic needs a > 0, got {a}"
            )));
        }
        if b < T::zero() || c < T::zero() {
            return Err(ChnsError::InvalidArgument(format!(
                "modified biharmonic needs b, c >= 0, got b={b}, c={c}"
            )));
        }
        let x = self.cells.solve_diagonal(rhs.values(), |l| Some(a + b * l + c * l * l));
        let x = self.cell_field(x);
        let lmax = self.ops.lap.max_abs_row_sum();
        let opnorm = a + b * lmax + c * lmax * lmax;
        let res = self.apply_modified_biharmonic(a, b, c, &x).sub(rhs);
        self.check_residual(
            "modified biharmonic",
            res.norm_euclid(),
            rhs.norm_euclid(),
            opnorm * x.norm_euclid(),
        )?;
        Ok(x)
    }

    /// Solves `-Lap x = rhs` with zero-flux boundaries; the returned
    /// solution has zero mean. An incompatible (nonzero-mean) right-hand
    /// side is projected onto the range.
    pub fn solve_poisson_neumann(&self, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
        let sum: T = rhs.values().iter().copied().sum();
        let abs_sum: T = rhs.values().iter().map(|v| v.abs()).sum();
        let mut rhs = rhs.clone();
        if sum.abs() > T::solver_tolerance() * abs_sum {
            log::debug!(
                "Poisson right-hand side has nonzero mean {:.3e}; projecting it out",
                to_f64(rhs.mean())
            );
            rhs.remove_mean();
        }
        let x = self
            .cells
            .solve_diagonal(rhs.values(), |l| if l > T::zero() { Some(l) } else { None });
        let mut x = self.cell_field(x);
        x.remove_mean();
        let mut res = self.laplacian_neumann(&x);
        res.scale(-T::one());
        let res = res.sub(&rhs);
        let lmax = self.ops.lap.max_abs_row_sum();
        self.check_residual("Poisson", res.norm_euclid(), rhs.norm_euclid(), lmax * x.norm_euclid())?;
        Ok(x)
    }

    /// Solves `(I - gamma Lap) u = rhs` componentwise with no-slip walls.
    /// Wall-normal entries of `rhs` are ignored.
    pub fn solve_helmholtz_noslip(&self, gamma: T, rhs: &FaceVectorField<T>) -> Result<FaceVectorField<T>> {
        if gamma < T::zero() {
            return Err(ChnsError::InvalidArgument(format!(
                "Helmholtz needs gamma >= 0, got {gamma}"
            )));
        }
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut rhs = rhs.clone();
        rhs.zero_boundary();
        let mut bx = Vec::with_capacity((nx - 1) * ny);
        for j in 0..ny {
            for i in 1..nx {
                bx.push(rhs.x_at(i, j));
            }
        }
        let mut by = Vec::with_capacity(nx * (ny - 1));
        for j in 1..ny {
            for i in 0..nx {
                by.push(rhs.y_at(i, j));
            }
        }
        let f = |l: T| Some(T::one() + gamma * l);
        let sx = self.xfaces.solve_diagonal(&bx, f);
        let sy = self.yfaces.solve_diagonal(&by, f);
        let mut out = FaceVectorField::zeros(g);
        {
            let v = out.values_mut();
            let mut k = 0;
            for j in 0..ny {
                for i in 1..nx {
                    v[g.xface(i, j)] = sx[k];
                    k += 1;
                }
            }
            k = 0;
            for j in 1..ny {
                for i in 0..nx {
                    v[g.yface(i, j)] = sy[k];
                    k += 1;
                }
            }
        }
        let mut res = self.vector_laplacian(&out);
        res.scale(-gamma);
        res.axpy(T::one(), &out);
        let res = res.sub(&rhs);
        let lmax = self.ops.vlap.max_abs_row_sum();
        self.check_residual(
            "Helmholtz",
            res.norm_euclid(),
            rhs.norm_euclid(),
            (T::one() + gamma * lmax) * out.norm_euclid(),
        )?;
        Ok(out)
    }

    /// Discrete Leray projection: returns `(u, p)` with
    /// `u = ustar - grad p` and `div u = 0`.
    pub fn project(&self, ustar: &FaceVectorField<T>) -> Result<(FaceVectorField<T>, ScalarField<T>)> {
        let d = self.div_face_to_cc(ustar);
        let p = self.solve_poisson_neumann(&d.scaled(-T::one()))?;
        let mut u = ustar.clone();
        u.axpy(-T::one(), &self.grad_cc_to_face(&p));
        Ok((u, p))
    }

    fn check_residual(&self, solver: &'static str, res: T, rhs: T, scale: T) -> Result<()> {
        // relative contract on the rhs, plus a backward-error allowance for
        // stiff operators where roundoff in x is amplified by |A|
        let tol = (T::solver_tolerance() * rhs + lit::<T>(1e3) * T::epsilon() * scale).max(T::min_positive_value());
        if !(res <= tol) {
            return Err(ChnsError::SolverResidual {
                solver,
                residual: to_f64(res),
                tolerance: to_f64(tol),
            });
        }
        Ok(())
    }

    /// Infinity norm of the discrete divergence.
    pub fn max_div(&self, u: &FaceVectorField<T>) -> T {
        self.div_face_to_cc(u).max_abs()
    }
}

/// Bilinear interpolation weights from the four cell centers surrounding
/// `p`. Rejects points outside the convex hull of cell centers.
pub fn bilinear_weights<T: Real>(grid: &Grid2D<T>, p: &ObservationPoint<T>) -> Result<[(usize, T); 4]> {
    let half = lit::<T>(0.5);
    let locate = |coord: T, h: T, n: usize| -> Option<(usize, T)> {
        let s = coord / h - half;
        let last: T = crate::scalar::count(n - 1);
        if !(s >= T::zero() && s <= last) {
            return None;
        }
        let i0 = s.floor().to_usize()?.min(n - 2);
        Some((i0, s - crate::scalar::count(i0)))
    };
    let outside = || {
        ChnsError::Observation(format!(
            "point ({}, {}) is outside the cell-center interpolation stencil",
            p.x, p.y
        ))
    };
    let (i0, tx) = locate(p.x, grid.hx(), grid.nx()).ok_or_else(outside)?;
    let (j0, ty) = locate(p.y, grid.hy(), grid.ny()).ok_or_else(outside)?;
    let one = T::one();
    Ok([
        (grid.cell(i0, j0), (one - tx) * (one - ty)),
        (grid.cell(i0 + 1, j0), tx * (one - ty)),
        (grid.cell(i0, j0 + 1), (one - tx) * ty),
        (grid.cell(i0 + 1, j0 + 1), tx * ty),
    ])
}

/// Point value of a cell-centered field by bilinear interpolation.
pub fn interp_bilinear<T: Real>(f: &ScalarField<T>, p: &ObservationPoint<T>) -> Result<T> {
    let w = bilinear_weights(f.grid(), p)?;
    Ok(w.iter().map(|&(k, c)| c * f.values()[k]).sum())
}

/// Convenience wrapper building a throwaway discretization.
pub fn laplacian_neumann<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    Discretization::new(f.grid()).laplacian_neumann(f)
}
