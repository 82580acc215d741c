//! Tangent of the discrete forward map around a stored trajectory.
//!
//! Each step is the exact derivative of [`crate::forward::step`] with all
//! coefficients taken from the base trajectory, so finite differences of
//! the forward solver converge to it at second order.

use crate::control::ControlField;
use crate::discretization::Discretization;
use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ScalarField};
use crate::forward::{
    convection, strain_coefficient, strain_divergence, viscosity_excess, ChOperator, Coupling, Models, StateTrajectory,
};
use crate::scalar::{lit, Real};

#[derive(Clone, Debug)]
pub struct LinTrajectory<T> {
    pub psi: Vec<ScalarField<T>>,
    pub w: Vec<FaceVectorField<T>>,
    /// Pressure perturbation; entry 0 is zero.
    pub pstar: Vec<ScalarField<T>>,
}

/// `F''(phi)` with zero where the argument was clamped.
pub(crate) fn potential_curvature<T: Real>(models: &Models<T>, phi: &ScalarField<T>) -> Vec<T> {
    phi.values()
        .iter()
        .map(|&v| {
            let e = models.potential.eval(v, 2);
            if e.clamped {
                T::zero()
            } else {
                e.value
            }
        })
        .collect()
}

/// Tangent of one step. Inputs are the base levels `n`, `n+1`, the
/// base chemical potential at `n+1` and the perturbations at level `n`.
#[allow(clippy::too_many_arguments)]
pub fn tangent_step<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    base: &StateTrajectory<T>,
    n: usize,
    psi: &ScalarField<T>,
    w: &FaceVectorField<T>,
    h: &ScalarField<T>,
) -> Result<(ScalarField<T>, FaceVectorField<T>, ScalarField<T>)> {
    let dt = base.dt;
    let ops = disc.ops();
    let g = disc.grid();
    let phi = &base.states[n].phi;
    let u = &base.states[n].u;
    let phi1 = &base.states[n + 1].phi;
    let mu1 = &base.mu[n + 1];
    let s = models.stabilization;
    let nc = g.n_cells();

    let f2 = potential_curvature(models, phi);
    let dfe: Vec<T> = (0..nc).map(|k| (f2[k] - s) * psi.values()[k]).collect();
    let ch = ChOperator::new(disc, models, phi, dt);

    // transport: div(w avg phi + u avg psi)
    let aphi = ops.avg.apply(phi.values());
    let apsi = ops.avg.apply(psi.values());
    let flux: Vec<T> = (0..g.n_faces())
        .map(|k| w.values()[k] * aphi[k] + u.values()[k] * apsi[k])
        .collect();
    let adv = ops.div.apply(&flux);
    let mob_f = ch.mob(&dfe);
    let mut rhs: Vec<T> = (0..nc)
        .map(|k| psi.values()[k] - dt * adv[k] + dt * h.values()[k] + dt * mob_f[k])
        .collect();

    let law = &models.material.mobility;
    if !law.is_constant() {
        let dm: Vec<T> = (0..nc).map(|k| law.deriv(phi.values()[k]) * psi.values()[k]).collect();
        let mut dmf = ops.avg.apply(&dm);
        let gmu = ops.grad.apply(mu1.values());
        dmf.iter_mut().zip(&gmu).for_each(|(a, &b)| *a *= b);
        let extra = ops.div.apply(&dmf);
        rhs.iter_mut().zip(&extra).for_each(|(r, &e)| *r += dt * e);
    }
    let psi1 = disc.cell_field(ch.solve(&rhs)?);
    let mut dmu = disc.cell_field(ch.shifted(psi1.values()));
    dmu.values_mut().iter_mut().zip(&dfe).for_each(|(a, &b)| *a += b);

    if models.coupling == Coupling::CahnHilliardOnly {
        return Ok((psi1, FaceVectorField::zeros(g), ScalarField::zeros(g)));
    }

    let amu = ops.avg.apply(mu1.values());
    let admu = ops.avg.apply(dmu.values());
    let gphi1 = ops.grad.apply(phi1.values());
    let gpsi1 = ops.grad.apply(psi1.values());
    let mut conv = convection(disc, u.values(), w.values());
    let c2 = convection(disc, w.values(), u.values());
    conv.iter_mut().zip(&c2).for_each(|(a, &b)| *a += b);

    let mut visc = viscosity_excess(disc, models, phi).map(|c| strain_divergence(disc, &c, w.values()));
    let vlaw = &models.material.viscosity;
    if !vlaw.is_constant() {
        let de: Vec<T> = (0..nc).map(|k| vlaw.deriv(phi.values()[k]) * psi.values()[k]).collect();
        let coef = strain_coefficient(disc, &de);
        let extra = strain_divergence(disc, &coef, u.values());
        match &mut visc {
            Some(v) => v.iter_mut().zip(&extra).for_each(|(a, &b)| *a += b),
            None => visc = Some(extra),
        }
    }
    let mut rhs_u = w.clone();
    {
        let r = rhs_u.values_mut();
        for k in 0..r.len() {
            let mut v = admu[k] * gphi1[k] + amu[k] * gpsi1[k] - conv[k];
            if let Some(vs) = &visc {
                v += vs[k];
            }
            r[k] += dt * v;
        }
    }
    let eref = vlaw.reference();
    let wstar = disc.solve_helmholtz_noslip(dt * eref, &rhs_u)?;
    let (w1, p) = disc.project(&wstar)?;
    Ok((psi1, w1, p.scaled(T::one() / dt)))
}

/// Forward sweep of the tangent system for control direction `h` and
/// initial perturbations `(psi0, w0)`.
pub fn solve_linearized<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    base: &StateTrajectory<T>,
    h: &ControlField<T>,
    psi0: &ScalarField<T>,
    w0: &FaceVectorField<T>,
) -> Result<LinTrajectory<T>> {
    let g = disc.grid();
    g.ensure_same(&base.grid, "base trajectory")?;
    g.ensure_same(h.grid(), "control direction")?;
    if h.steps() != base.steps() || h.dt() != base.dt {
        return Err(ChnsError::GridMismatch(format!(
            "direction has {} steps of {}, base has {} steps of {}",
            h.steps(),
            h.dt(),
            base.steps(),
            base.dt
        )));
    }
    let mut w0 = w0.clone();
    if models.coupling == Coupling::CahnHilliardOnly {
        w0.fill(T::zero());
    } else if !w0.boundary_is_zero() || disc.max_div(&w0) > lit(1e-10) {
        w0.zero_boundary();
        w0 = disc.project(&w0)?.0;
    }
    let n_steps = base.steps();
    let mut psi = Vec::with_capacity(n_steps + 1);
    let mut w = Vec::with_capacity(n_steps + 1);
    let mut pstar = Vec::with_capacity(n_steps + 1);
    psi.push(psi0.clone());
    w.push(w0);
    pstar.push(ScalarField::zeros(g));
    for n in 0..n_steps {
        let (p1, w1, ps) = tangent_step(disc, models, base, n, &psi[n], &w[n], h.at(n)).map_err(|e| e.at_step(n))?;
        psi.push(p1);
        w.push(w1);
        pstar.push(ps);
    }
    Ok(LinTrajectory { psi, w, pstar })
}
