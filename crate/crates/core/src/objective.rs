//! Pointwise-tracking costs, observation operators and the admissible box.

use crate::control::ControlField;
use crate::discretization::bilinear_weights;
use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ObservationPoint, ScalarField};
use crate::forward::StateTrajectory;
use crate::grid::Grid2D;
use crate::scalar::{count, lit, Real};

/// Whether the terminal tracking term is part of the cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CostMode {
    /// Running tracking only.
    #[default]
    J1,
    /// Running plus terminal tracking.
    J2,
}

/// How `phi(x_i)` is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observation<T> {
    /// Bilinear interpolation from the surrounding cell centers.
    Point,
    /// Average over the cells whose centers lie in `B(x_i, epsilon)`.
    Mollified { epsilon: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights<T> {
    pub tracking: T,
    pub velocity: T,
    pub control: T,
}

impl<T: Real> Default for CostWeights<T> {
    fn default() -> Self {
        Self {
            tracking: T::one(),
            velocity: T::one(),
            control: T::one(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CostSpec<T> {
    pub points: Vec<ObservationPoint<T>>,
    /// `targets[i][n]` is the target at point `i` and time level `n = 0..=N`.
    pub targets: Vec<Vec<T>>,
    /// Desired velocity at levels `0..=N`; `None` means zero.
    pub desired_velocity: Option<Vec<FaceVectorField<T>>>,
    pub mode: CostMode,
    pub observation: Observation<T>,
    pub weights: CostWeights<T>,
}

impl<T: Real> CostSpec<T> {
    /// Constant targets, zero desired velocity, unit weights.
    pub fn constant_targets(
        points: Vec<ObservationPoint<T>>,
        values: &[T],
        steps: usize,
        mode: CostMode,
        observation: Observation<T>,
    ) -> Self {
        Self {
            targets: values.iter().map(|&v| vec![v; steps + 1]).collect(),
            points,
            desired_velocity: None,
            mode,
            observation,
            weights: CostWeights::default(),
        }
    }

    pub fn desired_velocity_at(&self, n: usize) -> Option<&FaceVectorField<T>> {
        self.desired_velocity.as_ref().map(|v| &v[n])
    }

    pub fn validate(&self, grid: &Grid2D<T>, steps: usize) -> Result<()> {
        if self.targets.len() != self.points.len() {
            return Err(ChnsError::InvalidArgument(format!(
                "{} observation points but {} target series",
                self.points.len(),
                self.targets.len()
            )));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.len() != steps + 1 {
                return Err(ChnsError::InvalidArgument(format!(
                    "target series {i} has {} levels, expected {}",
                    t.len(),
                    steps + 1
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(ChnsError::InvalidArgument(format!("target series {i} is not finite")));
            }
        }
        if let Some(ud) = &self.desired_velocity {
            if ud.len() != steps + 1 {
                return Err(ChnsError::InvalidArgument(format!(
                    "desired velocity has {} levels, expected {}",
                    ud.len(),
                    steps + 1
                )));
            }
            for f in ud {
                grid.ensure_same(f.grid(), "desired velocity")?;
            }
        }
        let w = &self.weights;
        if !(w.tracking >= T::zero() && w.velocity >= T::zero() && w.control >= T::zero()) {
            return Err(ChnsError::InvalidArgument("cost weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Linear functionals `phi -> sum_k w_k phi_k`, one per point.
#[derive(Clone, Debug)]
pub struct ObservationOperator<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> ObservationOperator<T> {
    pub fn new(grid: &Grid2D<T>, points: &[ObservationPoint<T>], kind: Observation<T>) -> Result<Self> {
        for p in points {
            p.validate(grid)?;
        }
        let rows = match kind {
            Observation::Point => points
                .iter()
                .map(|p| bilinear_weights(grid, p).map(|w| w.to_vec()))
                .collect::<Result<Vec<_>>>()?,
            Observation::Mollified { epsilon } => {
                if !(epsilon >= lit::<T>(1.5) * grid.h_max()) {
                    return Err(ChnsError::Observation(format!(
                        "mollification radius {epsilon} is below 1.5 max(hx, hy) = {}",
                        lit::<T>(1.5) * grid.h_max()
                    )));
                }
                for (i, p) in points.iter().enumerate() {
                    if !(p.boundary_distance(grid) > epsilon) {
                        return Err(ChnsError::Observation(format!(
                            "ball of radius {epsilon} around point {i} touches the boundary"
                        )));
                    }
                    for (j, q) in points.iter().enumerate().skip(i + 1) {
                        let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
                        if !(d > lit::<T>(2.0) * epsilon) {
                            return Err(ChnsError::Observation(format!(
                                "balls around points {i} and {j} overlap"
                            )));
                        }
                    }
                }
                points.iter().map(|p| ball_cells(grid, p, epsilon)).collect()
            }
        };
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn observe(&self, phi: &ScalarField<T>) -> Vec<T> {
        let v = phi.values();
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(k, w)| w * v[k]).sum())
            .collect()
    }

    /// `sum_i c_i K_i^T / cell_area`: the area-weighted representative of
    /// `phi -> sum_i c_i obs_i(phi)`.
    pub fn adjoint(&self, grid: &Grid2D<T>, coeffs: &[T]) -> ScalarField<T> {
        let mut out = ScalarField::zeros(grid);
        let a = grid.cell_area();
        let v = out.values_mut();
        for (r, &c) in self.rows.iter().zip(coeffs) {
            for &(k, w) in r {
                v[k] += c * w / a;
            }
        }
        out
    }
}

/// Equal weights over the cells with centers in the closed ball.
fn ball_cells<T: Real>(grid: &Grid2D<T>, p: &ObservationPoint<T>, eps: T) -> Vec<(usize, T)> {
    // relative slack so that centers exactly on the sphere are included
    let r2 = eps * eps * (T::one() + lit(1e-12));
    let mut cells = Vec::new();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let (x, y) = grid.cell_center(i, j);
            if (x - p.x).powi(2) + (y - p.y).powi(2) <= r2 {
                cells.push(grid.cell(i, j));
            }
        }
    }
    let w = T::one() / count::<T>(cells.len());
    cells.into_iter().map(|k| (k, w)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CostBreakdown<T> {
    pub tracking_running: T,
    pub tracking_terminal: T,
    pub velocity_running: T,
    pub velocity_terminal: T,
    pub control_energy: T,
    pub total: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationRecord<T> {
    pub step: usize,
    pub t: T,
    pub point_index: usize,
    pub observed: T,
    pub target: T,
    pub misfit: T,
}

/// Cost specification bound to a grid and horizon.
#[derive(Clone, Debug)]
pub struct Objective<T> {
    spec: CostSpec<T>,
    obs: ObservationOperator<T>,
    grid: Grid2D<T>,
    steps: usize,
}

impl<T: Real> Objective<T> {
    pub fn new(grid: &Grid2D<T>, steps: usize, spec: CostSpec<T>) -> Result<Self> {
        spec.validate(grid, steps)?;
        let obs = ObservationOperator::new(grid, &spec.points, spec.observation)?;
        Ok(Self {
            spec,
            obs,
            grid: *grid,
            steps,
        })
    }

    pub fn spec(&self) -> &CostSpec<T> {
        &self.spec
    }
    pub fn observation_operator(&self) -> &ObservationOperator<T> {
        &self.obs
    }
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Same targets and weights, different observation operator.
    pub fn with_observation(&self, observation: Observation<T>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.observation = observation;
        Self::new(&self.grid, self.steps, spec)
    }

    fn check(&self, traj: &StateTrajectory<T>) -> Result<()> {
        self.grid.ensure_same(&traj.grid, "trajectory")?;
        if traj.steps() != self.steps {
            return Err(ChnsError::GridMismatch(format!(
                "trajectory has {} steps, cost expects {}",
                traj.steps(),
                self.steps
            )));
        }
        Ok(())
    }

    /// Per-point misfits `obs_i(phi^n) - target_i(t_n)`.
    pub fn misfits(&self, phi: &ScalarField<T>, n: usize) -> Vec<T> {
        self.obs
            .observe(phi)
            .into_iter()
            .zip(&self.spec.targets)
            .map(|(o, t)| o - t[n])
            .collect()
    }

    pub fn velocity_misfit(&self, u: &FaceVectorField<T>, n: usize) -> FaceVectorField<T> {
        match self.spec.desired_velocity_at(n) {
            Some(ud) => u.sub(ud),
            None => u.clone(),
        }
    }

    pub fn eval(&self, traj: &StateTrajectory<T>, control: &ControlField<T>) -> Result<CostBreakdown<T>> {
        self.check(traj)?;
        if control.steps() != self.steps || control.dt() != traj.dt {
            return Err(ChnsError::GridMismatch(format!(
                "control has {} steps of {}, trajectory has {} steps of {}",
                control.steps(),
                control.dt(),
                self.steps,
                traj.dt
            )));
        }
        let dt = traj.dt;
        let half = lit::<T>(0.5);
        let w = &self.spec.weights;
        let sq = |v: Vec<T>| v.into_iter().map(|m| m * m).sum::<T>();
        let n_last = self.steps;
        let mut c = CostBreakdown::default();
        for n in 0..n_last {
            let st = &traj.states[n];
            c.tracking_running += dt * sq(self.misfits(&st.phi, n));
            let vm = self.velocity_misfit(&st.u, n);
            c.velocity_running += dt * vm.dot(&vm);
        }
        let fin = &traj.states[n_last];
        if self.spec.mode == CostMode::J2 {
            c.tracking_terminal = sq(self.misfits(&fin.phi, n_last));
        }
        let vm = self.velocity_misfit(&fin.u, n_last);
        c.velocity_terminal = vm.dot(&vm);
        c.control_energy = control.dot(control);

        c.tracking_running *= half * w.tracking;
        c.tracking_terminal *= half * w.tracking;
        c.velocity_running *= half * w.velocity;
        c.velocity_terminal *= half * w.velocity;
        c.control_energy *= half * w.control;
        c.total =
            c.tracking_running + c.tracking_terminal + c.velocity_running + c.velocity_terminal + c.control_energy;
        Ok(c)
    }

    pub fn observations(&self, traj: &StateTrajectory<T>) -> Result<Vec<ObservationRecord<T>>> {
        self.check(traj)?;
        let mut out = Vec::new();
        for (n, st) in traj.states.iter().enumerate() {
            for (i, o) in self.obs.observe(&st.phi).into_iter().enumerate() {
                let target = self.spec.targets[i][n];
                out.push(ObservationRecord {
                    step: n,
                    t: st.t,
                    point_index: i,
                    observed: o,
                    target,
                    misfit: o - target,
                });
            }
        }
        Ok(out)
    }

    /// Area-weighted derivative of the tracking terms with respect to `phi^n`.
    pub fn phi_source(&self, traj: &StateTrajectory<T>, n: usize) -> ScalarField<T> {
        let w = self.spec.weights.tracking;
        let factor = if n < self.steps {
            traj.dt * w
        } else if self.spec.mode == CostMode::J2 {
            w
        } else {
            return ScalarField::zeros(&self.grid);
        };
        let m: Vec<T> = self
            .misfits(&traj.states[n].phi, n)
            .into_iter()
            .map(|v| v * factor)
            .collect();
        self.obs.adjoint(&self.grid, &m)
    }

    /// Area-weighted derivative of the velocity terms with respect to `u^n`.
    pub fn u_source(&self, traj: &StateTrajectory<T>, n: usize) -> FaceVectorField<T> {
        let w = self.spec.weights.velocity;
        let factor = if n < self.steps { traj.dt * w } else { w };
        self.velocity_misfit(&traj.states[n].u, n).scaled(factor)
    }
}

/// Pointwise bounds `lower <= U <= upper`.
#[derive(Clone, Debug)]
pub struct AdmissibleBox<T> {
    pub lower: ControlField<T>,
    pub upper: ControlField<T>,
}

impl<T: Real> AdmissibleBox<T> {
    pub fn new(lower: ControlField<T>, upper: ControlField<T>) -> Result<Self> {
        lower.ensure_compatible(&upper)?;
        for (n, (l, u)) in lower.snapshots().iter().zip(upper.snapshots()).enumerate() {
            if l.values().iter().zip(u.values()).any(|(a, b)| !(a <= b)) {
                return Err(ChnsError::InvalidArgument(format!(
                    "box lower bound exceeds upper bound at step {n}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn constant(grid: &Grid2D<T>, dt: T, steps: usize, lo: T, hi: T) -> Result<Self> {
        if !(lo <= hi) {
            return Err(ChnsError::InvalidArgument(format!(
                "box lower bound {lo} exceeds upper bound {hi}"
            )));
        }
        Self::new(
            ControlField::constant(grid, dt, steps, lo),
            ControlField::constant(grid, dt, steps, hi),
        )
    }

    pub fn contains(&self, u: &ControlField<T>) -> bool {
        u.snapshots()
            .iter()
            .zip(self.lower.snapshots().iter().zip(self.upper.snapshots()))
            .all(|(s, (l, h))| {
                s.values()
                    .iter()
                    .zip(l.values().iter().zip(h.values()))
                    .all(|(&v, (&a, &b))| v >= a && v <= b)
            })
    }
}

pub fn project_box<T: Real>(u: &ControlField<T>, bx: &AdmissibleBox<T>) -> Result<ControlField<T>> {
    u.ensure_compatible(&bx.lower)?;
    let mut out = u.clone();
    for ((s, l), h) in out
        .snapshots_mut()
        .iter_mut()
        .zip(bx.lower.snapshots())
        .zip(bx.upper.snapshots())
    {
        for ((v, &a), &b) in s.values_mut().iter_mut().zip(l.values()).zip(h.values()) {
            *v = v.max(a).min(b);
        }
    }
    Ok(out)
}

/// `||U - P(U - g)||` in `L^2(Q)`.
pub fn stationarity_residual<T: Real>(u: &ControlField<T>, g: &ControlField<T>, bx: &AdmissibleBox<T>) -> Result<T> {
    u.ensure_compatible(g)?;
    let p = project_box(&u.sub(g), bx)?;
    Ok(u.sub(&p).norm())
}
