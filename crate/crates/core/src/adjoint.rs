//! Backward sweep for the reduced-cost gradient.
//!
//! [`adjoint_step`] is the exact transpose of [`crate::linearized::tangent_step`]
//! under the area-weighted inner products, so `<xi, h>` equals the tangent
//! response of the discrete cost to machine precision. Observation sources
//! enter through the cost's [`ObservationOperator`], which for the mollified
//! kind is the normalized ball indicator.

use crate::control::ControlField;
use crate::discretization::Discretization;
use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ScalarField};
use crate::forward::{strain_divergence, viscosity_excess, ChOperator, Coupling, Models, StateTrajectory};
use crate::linearized::potential_curvature;
use crate::objective::{CostMode, CostSpec, Objective, Observation};
use crate::scalar::{lit, Real};

/// Normalized ball-indicator sources built from the base misfits.
#[derive(Clone, Debug)]
pub struct MollifiedSource<T> {
    pub epsilon: T,
    /// `R^n` for `n = 0..N-1`.
    pub r: Vec<ScalarField<T>>,
    /// Terminal source; zero in J1 mode.
    pub xi_t: ScalarField<T>,
}

/// `R^n = sum_i chi_i (ball-avg_i(phi^n) - target_i(t_n)) / A_i` with
/// `A_i` the covered area.
pub fn build_mollified_source<T: Real>(
    base: &StateTrajectory<T>,
    spec: &CostSpec<T>,
    epsilon: T,
) -> Result<MollifiedSource<T>> {
    let mut spec = spec.clone();
    spec.observation = Observation::Mollified { epsilon };
    let obj = Objective::new(&base.grid, base.steps(), spec)?;
    let op = obj.observation_operator();
    let r = (0..base.steps())
        .map(|n| op.adjoint(&base.grid, &obj.misfits(&base.states[n].phi, n)))
        .collect();
    let n = base.steps();
    let xi_t = match obj.spec().mode {
        CostMode::J1 => ScalarField::zeros(&base.grid),
        CostMode::J2 => op.adjoint(&base.grid, &obj.misfits(&base.states[n].phi, n)),
    };
    Ok(MollifiedSource { epsilon, r, xi_t })
}

#[derive(Clone, Debug)]
pub struct AdjointTrajectory<T> {
    /// `xi[n]` for `n < N` is the gradient density of the tracking and
    /// velocity terms on step `n`; `xi[N]` is the assembled terminal value.
    pub xi: Vec<ScalarField<T>>,
    /// Projected velocity cotangent entering each step; `v[N]` is the
    /// terminal value as assembled.
    pub v: Vec<FaceVectorField<T>>,
    /// Pressure multiplier of the projection in `v`.
    pub q: Vec<ScalarField<T>>,
}

/// Cotangents on level `n` produced by one transposed step.
pub struct AdjointStep<T> {
    pub lambda_phi: ScalarField<T>,
    pub lambda_u: FaceVectorField<T>,
    /// Cotangent of the control on step `n`, per unit `dt`.
    pub sigma: ScalarField<T>,
    pub v: FaceVectorField<T>,
    pub q: ScalarField<T>,
}

/// Transpose of the tangent step `n -> n+1`.
pub fn adjoint_step<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    base: &StateTrajectory<T>,
    n: usize,
    lambda_phi1: &ScalarField<T>,
    lambda_u1: &FaceVectorField<T>,
) -> Result<AdjointStep<T>> {
    let dt = base.dt;
    let ops = disc.ops();
    let g = disc.grid();
    let nc = g.n_cells();
    let nf = g.n_faces();
    let phi = &base.states[n].phi;
    let u = &base.states[n].u;
    let phi1 = &base.states[n + 1].phi;
    let mu1 = &base.mu[n + 1];
    let s = models.stabilization;
    let ch = ChOperator::new(disc, models, phi, dt);

    let mut a_psi1 = lambda_phi1.values().to_vec();
    let mut a_dfe = vec![T::zero(); nc];
    let mut a_psi = vec![T::zero(); nc];
    let mut a_w = vec![T::zero(); nf];
    let (v, q) = if models.coupling == Coupling::Full {
        let mut lu = lambda_u1.clone();
        lu.zero_boundary();
        let (v, qq) = disc.project(&lu)?;
        let eref = models.material.viscosity.reference();
        let a_rhs = disc.solve_helmholtz_noslip(dt * eref, &v)?;
        let r: Vec<T> = a_rhs.values().iter().map(|&x| dt * x).collect();
        a_w.iter_mut().zip(a_rhs.values()).for_each(|(a, &b)| *a += b);

        // capillary force avg(dmu) grad phi1 + avg(mu1) grad psi1
        let gphi1 = ops.grad.apply(phi1.values());
        let amu = ops.avg.apply(mu1.values());
        let t1: Vec<T> = (0..nf).map(|k| r[k] * gphi1[k]).collect();
        let a_dmu = ops.avg.apply_t(&t1);
        let t2: Vec<T> = (0..nf).map(|k| r[k] * amu[k]).collect();
        let gt = ops.grad.apply_t(&t2);
        a_psi1.iter_mut().zip(&gt).for_each(|(a, &b)| *a += b);

        // convection, contributing -r
        let dn_u = ops.d_normal.apply(u.values());
        let dt_u = ops.d_cross.apply(u.values());
        let ic_u = ops.interp_cross.apply(u.values());
        let t3: Vec<T> = (0..nf).map(|k| -r[k] * dt_u[k]).collect();
        let ict = ops.interp_cross.apply_t(&t3);
        let t4: Vec<T> = (0..nf).map(|k| -r[k] * u.values()[k]).collect();
        let dnt = ops.d_normal.apply_t(&t4);
        let t5: Vec<T> = (0..nf).map(|k| -r[k] * ic_u[k]).collect();
        let dtt = ops.d_cross.apply_t(&t5);
        for k in 0..nf {
            a_w[k] += -r[k] * dn_u[k] + ict[k] + dnt[k] + dtt[k];
        }

        // viscosity remainder and its coefficient derivative
        if let Some(c) = viscosity_excess(disc, models, phi) {
            let sv = strain_divergence(disc, &c, &r);
            a_w.iter_mut().zip(&sv).for_each(|(a, &b)| *a += b);
        }
        let vlaw = &models.material.viscosity;
        if !vlaw.is_constant() {
            let eu = ops.strain.apply(u.values());
            let er = ops.strain.apply(&r);
            let two = lit::<T>(2.0);
            let a_coef: Vec<T> = (0..eu.len())
                .map(|k| -two * ops.strain_weight[k] * eu[k] * er[k])
                .collect();
            let corner = ops.corner_avg.apply_t(&a_coef[2 * nc..]);
            for k in 0..nc {
                let ax = a_coef[k] + a_coef[nc + k] + corner[k];
                a_psi[k] += vlaw.deriv(phi.values()[k]) * ax;
            }
        }

        let sh = ch.shifted(&a_dmu);
        a_psi1.iter_mut().zip(&sh).for_each(|(a, &b)| *a += b);
        a_dfe.iter_mut().zip(&a_dmu).for_each(|(a, &b)| *a += b);
        (v, qq)
    } else {
        (FaceVectorField::zeros(g), ScalarField::zeros(g))
    };

    let sigma = ch.solve_t(&a_psi1)?;
    a_psi.iter_mut().zip(&sigma).for_each(|(a, &b)| *a += b);
    let ms = ch.mob(&sigma);
    a_dfe.iter_mut().zip(&ms).for_each(|(a, &b)| *a += dt * b);

    let dts = ops.div.apply_t(&sigma);
    let law = &models.material.mobility;
    if !law.is_constant() {
        let gmu = ops.grad.apply(mu1.values());
        let t: Vec<T> = (0..nf).map(|k| gmu[k] * dts[k]).collect();
        let at = ops.avg.apply_t(&t);
        for k in 0..nc {
            a_psi[k] += dt * law.deriv(phi.values()[k]) * at[k];
        }
    }
    // transport: a_flux = -dt div^T sigma
    let aphi = ops.avg.apply(phi.values());
    let a_flux: Vec<T> = dts.iter().map(|&x| -dt * x).collect();
    if models.coupling == Coupling::Full {
        for k in 0..nf {
            a_w[k] += aphi[k] * a_flux[k];
        }
    }
    let t: Vec<T> = (0..nf).map(|k| u.values()[k] * a_flux[k]).collect();
    let at = ops.avg.apply_t(&t);
    a_psi.iter_mut().zip(&at).for_each(|(a, &b)| *a += b);

    let f2 = potential_curvature(models, phi);
    for k in 0..nc {
        a_psi[k] += (f2[k] - s) * a_dfe[k];
    }

    let mut lambda_u = disc.face_field(a_w);
    lambda_u.zero_boundary();
    Ok(AdjointStep {
        lambda_phi: disc.cell_field(a_psi),
        lambda_u,
        sigma: disc.cell_field(sigma),
        v,
        q,
    })
}

/// Backward sweep `n = N-1, ..., 0` with the sources of `objective`.
pub fn solve_adjoint<T: Real>(
    disc: &Discretization<T>,
    models: &Models<T>,
    base: &StateTrajectory<T>,
    objective: &Objective<T>,
) -> Result<AdjointTrajectory<T>> {
    disc.grid().ensure_same(&base.grid, "base trajectory")?;
    let n_steps = base.steps();
    if objective.steps() != n_steps {
        return Err(ChnsError::GridMismatch(format!(
            "cost expects {} steps, base has {}",
            objective.steps(),
            n_steps
        )));
    }
    let g = disc.grid();
    let mut xi = vec![ScalarField::zeros(g); n_steps + 1];
    let mut v = vec![FaceVectorField::zeros(g); n_steps + 1];
    let mut q = vec![ScalarField::zeros(g); n_steps + 1];
    let mut lphi = objective.phi_source(base, n_steps);
    let mut lu = objective.u_source(base, n_steps);
    if models.coupling == Coupling::CahnHilliardOnly {
        lu.fill(T::zero());
    }
    xi[n_steps] = lphi.clone();
    v[n_steps] = lu.clone();
    for n in (0..n_steps).rev() {
        let st = adjoint_step(disc, models, base, n, &lphi, &lu).map_err(|e| e.at_step(n))?;
        xi[n] = st.sigma;
        v[n] = st.v;
        q[n] = st.q;
        lphi = st.lambda_phi;
        lphi.axpy(T::one(), &objective.phi_source(base, n));
        lu = st.lambda_u;
        if models.coupling == Coupling::Full {
            lu.axpy(T::one(), &objective.u_source(base, n));
        }
    }
    Ok(AdjointTrajectory { xi, v, q })
}

/// `g^n = xi^n + w_ctrl U^n`, the `L^2(Q)` representative of the reduced
/// cost derivative.
pub fn cost_gradient<T: Real>(
    control: &ControlField<T>,
    adj: &AdjointTrajectory<T>,
    control_weight: T,
) -> Result<ControlField<T>> {
    if adj.xi.len() != control.steps() + 1 {
        return Err(ChnsError::GridMismatch(format!(
            "adjoint has {} levels, control has {} steps",
            adj.xi.len(),
            control.steps()
        )));
    }
    let mut g = ControlField::from_snapshots(control.grid(), control.dt(), adj.xi[..control.steps()].to_vec())?;
    g.axpy(control_weight, control);
    Ok(g)
}
