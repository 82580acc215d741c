//! Stabilized semi-implicit time stepping of the coupled system.
//!
//! One step from `(phi^n, u^n)`:
//!
//! 1. Cahn-Hilliard: `phi' - dt div(m grad mu') = phi^n - dt div(u^n avg phi^n) + dt U^n`
//!    with `mu' = (S - Lap) phi' + F'(phi^n) - S phi^n` and `m = m(phi^n)`.
//! 2. Momentum predictor: `(I - dt eta_ref Lap) u* = u^n + dt (-B(u^n, u^n) + V(phi^n, u^n) + avg(mu') grad phi')`,
//!    where `V` is the explicit variable-viscosity remainder.
//! 3. Projection: `u' = u* - grad p`, `pi' = p / dt`.

use crate::control::ControlField;
use crate::discretization::Discretization;
use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ScalarField};
use crate::grid::Grid2D;
use crate::material::{stabilization_constant, MaterialModel, PotentialModel};
use crate::scalar::{count, lit, to_f64, Real};

/// Which blocks of the system are advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Coupling {
    #[default]
    Full,
    /// Cahn-Hilliard only, with the velocity held at zero.
    CahnHilliardOnly,
}

/// Everything constitutive plus the scheme constants.
#[derive(Clone, Debug)]
pub struct Models<T> {
    pub material: MaterialModel<T>,
    pub potential: PotentialModel<T>,
    /// Stabilization constant `S`.
    pub stabilization: T,
    pub coupling: Coupling,
    /// Sweep limit for the variable-mobility Cahn-Hilliard solve.
    pub mobility_sweeps: usize,
    /// Relative residual target for the variable-mobility solve.
    pub mobility_tolerance: T,
}

impl<T: Real> Models<T> {
    /// Constant mobility and viscosity with `S` chosen for `s_range`.
    pub fn new(material: MaterialModel<T>, potential: PotentialModel<T>, s_range: (T, T)) -> Result<Self> {
        let stabilization = stabilization_constant(&potential, s_range)?;
        Ok(Self {
            material,
            potential,
            stabilization,
            coupling: Coupling::Full,
            mobility_sweeps: 100,
            mobility_tolerance: lit(1e-12),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.potential.validate()?;
        if !(self.stabilization >= T::zero()) {
            return Err(ChnsError::InvalidArgument(format!(
                "stabilization constant must be nonnegative, got {}",
                self.stabilization
            )));
        }
        if self.mobility_sweeps == 0 || !(self.mobility_tolerance > T::zero()) {
            return Err(ChnsError::InvalidArgument(
                "mobility solve needs at least one sweep and a positive tolerance".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub phi: ScalarField<T>,
    pub u: FaceVectorField<T>,
    pub pi: ScalarField<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn new(phi: ScalarField<T>, u: FaceVectorField<T>) -> Result<Self> {
        phi.grid().ensure_same(u.grid(), "initial velocity")?;
        let pi = ScalarField::zeros(phi.grid());
        Ok(Self {
            phi,
            u,
            pi,
            t: T::zero(),
        })
    }
    pub fn grid(&self) -> &Grid2D<T> {
        self.phi.grid()
    }
}

/// States `0..=N` with the chemical potential at each level.
#[derive(Clone, Debug)]
pub struct StateTrajectory<T> {
    pub grid: Grid2D<T>,
    pub dt: T,
    pub states: Vec<State<T>>,
    /// `mu[0]` is `-Lap phi^0 + F'(phi^0)`; later entries come from the scheme.
    pub mu: Vec<ScalarField<T>>,
    /// Number of potential evaluations whose argument had to be clamped.
    pub clamp_events: usize,
}

impl<T: Real> StateTrajectory<T> {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }
    pub fn final_state(&self) -> &State<T> {
        self.states.last().expect("trajectory holds the initial state")
    }
    pub fn final_time(&self) -> T {
        self.final_state().t
    }
}

/// Output of a single step.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub state: State<T>,
    pub mu: ScalarField<T>,
    pub clamp_events: usize,
}

/// `F'(phi) - S phi` and the clamp count.
pub(crate) fn explicit_potential<T: Real>(models: &Models<T>, phi: &ScalarField<T>) -> (ScalarField<T>, usize) {
    let s = models.stabilization;
    let mut clamps = 0;
    let values = phi
        .values()
        .iter()
        .map(|&v| {
            let e = models.potential.eval(v, 1);
            clamps += usize::from(e.clamped);
            e.value - s * v
        })
        .collect();
    (ScalarField::from_values(phi.grid(), values).expect("same grid"), clamps)
}

/// Implicit Cahn-Hilliard operator `A = I - dt Mob (S - Lap)` with
/// `Mob = div(m(phi^n) grad)`.
pub(crate) struct ChOperator<'a, T> {
    disc: &'a Discretization<T>,
    dt: T,
    s: T,
    mref: T,
    mface: Option<Vec<T>>,
    sweeps: usize,
    tol: T,
}

impl<'a, T: Real> ChOperator<'a, T> {
    pub(crate) fn new(disc: &'a Discretization<T>, models: &Models<T>, phi: &ScalarField<T>, dt: T) -> Self {
        let mob = &models.material.mobility;
        let mface = if mob.is_constant() {
            None
        } else {
            let mc: Vec<T> = phi.values().iter().map(|&v| mob.eval(v)).collect();
            Some(disc.ops().avg.apply(&mc))
        };
        Self {
            disc,
            dt,
            s: models.stabilization,
            mref: mob.reference(),
            mface,
            sweeps: models.mobility_sweeps,
            tol: models.mobility_tolerance,
        }
    }

    /// `div(m grad x)`.
    pub(crate) fn mob(&self, x: &[T]) -> Vec<T> {
        let ops = self.disc.ops();
        let mut gx = ops.grad.apply(x);
        match &self.mface {
            Some(m) => gx.iter_mut().zip(m).for_each(|(g, &mv)| *g *= mv),
            None => gx.iter_mut().for_each(|g| *g *= self.mref),
        }
        ops.div.apply(&gx)
    }

    /// `(S - Lap) x`.
    pub(crate) fn shifted(&self, x: &[T]) -> Vec<T> {
        let lx = self.disc.ops().lap.apply(x);
        x.iter().zip(&lx).map(|(&a, &l)| self.s * a - l).collect()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let y = self.mob(&self.shifted(x));
        x.iter().zip(&y).map(|(&a, &b)| a - self.dt * b).collect()
    }

    fn apply_t(&self, x: &[T]) -> Vec<T> {
        let y = self.shifted(&self.mob(x));
        x.iter().zip(&y).map(|(&a, &b)| a - self.dt * b).collect()
    }

    fn precondition(&self, r: &[T]) -> Result<Vec<T>> {
        let f = ScalarField::from_values(self.disc.grid(), r.to_vec())?;
        let dm = self.dt * self.mref;
        Ok(self
            .disc
            .solve_modified_biharmonic(T::one(), dm * self.s, dm, &f)?
            .into_values())
    }

    pub(crate) fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        self.richardson(rhs, false)
    }

    pub(crate) fn solve_t(&self, rhs: &[T]) -> Result<Vec<T>> {
        self.richardson(rhs, true)
    }

    /// Residual level that rounding alone produces when applying `A`:
    /// `16 eps (1 + dt m_max lam (S + lam))` relative, with `lam` the
    /// largest Laplacian eigenvalue bound.
    fn roundoff_floor(&self) -> T {
        let g = self.disc.grid();
        let four = lit::<T>(4.0);
        let lam = four / (g.hx() * g.hx()) + four / (g.hy() * g.hy());
        let mmax = self
            .mface
            .as_ref()
            .map_or(self.mref, |m| m.iter().fold(T::zero(), |a, &b| a.max(b.abs())));
        lit::<T>(16.0) * T::epsilon() * (T::one() + self.dt * mmax * lam * (self.s + lam))
    }

    fn richardson(&self, rhs: &[T], transpose: bool) -> Result<Vec<T>> {
        let mut x = self.precondition(rhs)?;
        if self.mface.is_none() {
            return Ok(x);
        }
        let norm = |v: &[T]| v.iter().map(|&a| a * a).sum::<T>().sqrt();
        let rn = norm(rhs);
        let floor = self.roundoff_floor() * rn;
        let mut res = T::zero();
        let mut prev = T::infinity();
        for _ in 0..self.sweeps {
            let ax = if transpose { self.apply_t(&x) } else { self.apply(&x) };
            let r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
            res = norm(&r);
            if res <= self.tol * rn || res == T::zero() {
                return Ok(x);
            }
            // stagnation below the rounding level: the requested tolerance is unattainable
            if res <= floor && res > lit::<T>(0.5) * prev {
                return Ok(x);
            }
            prev = res;
            let dx = self.precondition(&r)?;
            x.iter_mut().zip(&dx).for_each(|(a, &d)| *a += d);
        }
        if res <= floor {
            return Ok(x);
        }
        Err(ChnsError::SolverResidual {
            solver: "variable-mobility Cahn-Hilliard",
            residual: to_f64(res),
            tolerance: to_f64((self.tol * rn).max(floor)),
        })
    }
}

/// `B(u, w) = w (D_n u) + (I_c w)(D_t u)`, linear in each slot; the
/// convective term is `B(u, u)`.
pub(crate) fn convection<T: Real>(disc: &Discretization<T>, a: &[T], b: &[T]) -> Vec<T> {
    let ops = disc.ops();
    let dn = ops.d_normal.apply(a);
    let dt = ops.d_cross.apply(a);
    let ic = ops.interp_cross.apply(b);
    (0..a.len()).map(|k| b[k] * dn[k] + ic[k] * dt[k]).collect()
}

/// Viscosity sampled on the strain layout `[cells, cells, corners]`.
pub(crate) fn strain_coefficient<T: Real>(disc: &Discretization<T>, cell_values: &[T]) -> Vec<T> {
    let corners = disc.ops().corner_avg.apply(cell_values);
    let mut out = Vec::with_capacity(2 * cell_values.len() + corners.len());
    out.extend_from_slice(cell_values);
    out.extend_from_slice(cell_values);
    out.extend(corners);
    out
}

/// `-strain^T (W * 2 coef * strain u)`, i.e. `div(2 coef D u)`.
pub(crate) fn strain_divergence<T: Real>(disc: &Discretization<T>, coef: &[T], u: &[T]) -> Vec<T> {
    let ops = disc.ops();
    let e = ops.strain.apply(u);
    let two = lit::<T>(2.0);
    let z: Vec<T> = e
        .iter()
        .zip(coef.iter().zip(&ops.strain_weight))
        .map(|(&ev, (&c, &w))| -two * w * c * ev)
        .collect();
    ops.strain.apply_t(&z)
}

/// `eta(phi) - eta_ref` on the strain layout, or `None` for constant viscosity.
pub(crate) fn viscosity_excess<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    phi: &ScalarField<T>,
) -> Option<Vec<T>> {
    let law = &models.material.viscosity;
    if law.is_constant() {
        return None;
    }
    let eref = law.reference();
    let cells: Vec<T> = phi.values().iter().map(|&v| law.eval(v) - eref).collect();
    Some(strain_coefficient(disc, &cells))
}

pub fn cfl_number<T: Real>(u: &FaceVectorField<T>, dt: T) -> T {
    u.max_abs() * dt / u.grid().h_min()
}

/// Advances one step. `step_index` is used for error reporting only.
pub fn step<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    state: &State<T>,
    control: &ScalarField<T>,
    dt: T,
    step_index: usize,
) -> Result<StepOutput<T>> {
    let g = disc.grid();
    if !(dt > T::zero()) {
        return Err(ChnsError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    g.ensure_same(state.grid(), "state")?;
    g.ensure_same(control.grid(), "control")?;
    let cfl = cfl_number(&state.u, dt);
    if cfl > T::one() {
        return Err(ChnsError::Cfl {
            step: step_index,
            cfl: to_f64(cfl),
        });
    }
    let ops = disc.ops();
    let phi = &state.phi;
    let u = &state.u;

    let (f1, clamp_events) = explicit_potential(models, phi);
    let ch = ChOperator::new(disc, models, phi, dt);

    let mut flux = ops.avg.apply(phi.values());
    flux.iter_mut().zip(u.values()).for_each(|(f, &uv)| *f *= uv);
    let adv = ops.div.apply(&flux);
    let mob_f = ch.mob(f1.values());
    let rhs: Vec<T> = (0..g.n_cells())
        .map(|k| phi.values()[k] - dt * adv[k] + dt * control.values()[k] + dt * mob_f[k])
        .collect();
    let phi_new = disc.cell_field(ch.solve(&rhs)?);
    let mut mu = disc.cell_field(ch.shifted(phi_new.values()));
    mu.axpy(T::one(), &f1);

    let (u_new, pi) = match models.coupling {
        Coupling::CahnHilliardOnly => (FaceVectorField::zeros(g), ScalarField::zeros(g)),
        Coupling::Full => {
            let mut force = ops.avg.apply(mu.values());
            let gphi = ops.grad.apply(phi_new.values());
            force.iter_mut().zip(&gphi).for_each(|(f, &gp)| *f *= gp);
            let conv = convection(disc, u.values(), u.values());
            let visc = viscosity_excess(disc, models, phi).map(|c| strain_divergence(disc, &c, u.values()));
            let mut rhs = u.clone();
            {
                let r = rhs.values_mut();
                for k in 0..r.len() {
                    let mut v = force[k] - conv[k];
                    if let Some(vs) = &visc {
                        v += vs[k];
                    }
                    r[k] += dt * v;
                }
            }
            let eref = models.material.viscosity.reference();
            let ustar = disc.solve_helmholtz_noslip(dt * eref, &rhs)?;
            let (u_new, p) = disc.project(&ustar)?;
            (u_new, p.scaled(T::one() / dt))
        }
    };

    if !phi_new.all_finite() {
        return Err(ChnsError::NonFinite {
            field: "phi",
            step: step_index,
        });
    }
    if !u_new.all_finite() {
        return Err(ChnsError::NonFinite {
            field: "u",
            step: step_index,
        });
    }
    Ok(StepOutput {
        state: State {
            phi: phi_new,
            u: u_new,
            pi,
            t: state.t + dt,
        },
        mu,
        clamp_events,
    })
}

/// `-Lap phi + F'(phi)`.
pub fn chemical_potential<T: Real>(
    disc: &Discretization<T>,
    potential: &PotentialModel<T>,
    phi: &ScalarField<T>,
) -> ScalarField<T> {
    let mut mu = disc.laplacian_neumann(phi).scaled(-T::one());
    for (m, &p) in mu.values_mut().iter_mut().zip(phi.values()) {
        *m += potential.eval(p, 1).value;
    }
    mu
}

#[derive(Clone, Debug)]
pub struct SimulateOptions<T> {
    pub dt: T,
    pub steps: usize,
}

impl<T: Real> SimulateOptions<T> {
    /// Uniform steps covering `[0, t_final]`; `t_final` must be a multiple
    /// of `dt` to within `1e-12` relative.
    pub fn from_final_time(t_final: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !(t_final >= T::zero()) {
            return Err(ChnsError::InvalidArgument(format!(
                "need dt > 0 and T >= 0, got dt={dt}, T={t_final}"
            )));
        }
        let n = (t_final / dt).round();
        if (n * dt - t_final).abs() > lit::<T>(1e-12) * t_final.max(T::one()) {
            return Err(ChnsError::InvalidArgument(format!(
                "final time {t_final} is not a whole number of steps of {dt}"
            )));
        }
        Ok(Self {
            dt,
            steps: n.to_usize().unwrap_or(0),
        })
    }
}

/// Runs `opts.steps` steps. A non-solenoidal `u0` is projected first.
pub fn simulate<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    phi0: &ScalarField<T>,
    u0: &FaceVectorField<T>,
    control: &ControlField<T>,
    opts: &SimulateOptions<T>,
) -> Result<StateTrajectory<T>> {
    let g = disc.grid();
    g.ensure_same(phi0.grid(), "initial phase field")?;
    g.ensure_same(u0.grid(), "initial velocity")?;
    g.ensure_same(control.grid(), "control")?;
    if control.steps() != opts.steps {
        return Err(ChnsError::InvalidArgument(format!(
            "control has {} steps, run has {}",
            control.steps(),
            opts.steps
        )));
    }
    if control.dt() != opts.dt {
        return Err(ChnsError::InvalidArgument(format!(
            "control dt {} differs from run dt {}",
            control.dt(),
            opts.dt
        )));
    }
    let mut u0 = u0.clone();
    if models.coupling == Coupling::CahnHilliardOnly {
        u0.fill(T::zero());
    } else if !u0.boundary_is_zero() || disc.max_div(&u0) > lit(1e-10) {
        log::info!(
            "initial velocity is not discretely solenoidal (max div {:.3e}); projecting",
            to_f64(disc.max_div(&u0))
        );
        u0.zero_boundary();
        u0 = disc.project(&u0)?.0;
    }
    let mut states = Vec::with_capacity(opts.steps + 1);
    let mut mu = Vec::with_capacity(opts.steps + 1);
    states.push(State::new(phi0.clone(), u0)?);
    mu.push(chemical_potential(disc, &models.potential, phi0));
    let mut clamp_events = 0;
    for n in 0..opts.steps {
        let out = step(disc, models, &states[n], control.at(n), opts.dt, n).map_err(|e| e.at_step(n))?;
        let mut st = out.state;
        st.t = opts.dt * count::<T>(n + 1);
        clamp_events += out.clamp_events;
        states.push(st);
        mu.push(out.mu);
    }
    if clamp_events > 0 {
        log::warn!("{clamp_events} potential evaluations were clamped");
    }
    Ok(StateTrajectory {
        grid: *g,
        dt: opts.dt,
        states,
        mu,
        clamp_events,
    })
}

pub fn mass<T: Real>(phi: &ScalarField<T>) -> T {
    phi.integral()
}

/// `integral( |grad phi|^2 / 2 + F(phi) + |u|^2 / 2 )` by midpoint sums.
pub fn energy<T: Real>(state: &State<T>, potential: &PotentialModel<T>) -> T {
    let g = state.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let phi = &state.phi;
    let half = lit::<T>(0.5);
    let mut grad2 = T::zero();
    for j in 0..ny {
        for i in 1..nx {
            let d = (phi.at(i, j) - phi.at(i - 1, j)) / g.hx();
            grad2 += d * d;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let d = (phi.at(i, j) - phi.at(i, j - 1)) / g.hy();
            grad2 += d * d;
        }
    }
    let bulk: T = phi.values().iter().map(|&v| potential.eval(v, 0).value).sum();
    let kinetic: T = state.u.values().iter().map(|&v| v * v).sum();
    g.cell_area() * (half * grad2 + bulk + half * kinetic)
}
