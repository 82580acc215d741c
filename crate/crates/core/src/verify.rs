//! Derivative, duality and stability oracles plus the invariant suite.
//!
//! The finite-difference and Taylor oracles use only the forward solver and
//! the cost; the duality rhs uses only the tangent solver and the cost.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlField;
use crate::discretization::{interp_bilinear, Discretization};
use crate::error::{ChnsError, Result};
use crate::field::{FaceVectorField, ScalarField};
use crate::forward::{energy, mass, simulate, Models, SimulateOptions, StateTrajectory};
use crate::grid::Grid2D;
use crate::material::PotentialModel;
use crate::objective::{CostMode, Observation};
use crate::problem::ControlProblem;
use crate::scalar::{lit, to_f64, Real};

fn check_betas<T: Real>(betas: &[T]) -> Result<()> {
    if betas.len() < 3 {
        return Err(ChnsError::InvalidArgument("need at least three step sizes".into()));
    }
    if betas.iter().any(|&b| !(b > T::zero())) || betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ChnsError::InvalidArgument(
            "step sizes must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > T::zero() && **b > T::zero())
        .map(|(a, b)| (to_f64(*a).ln(), to_f64(*b).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| lit(sxy / sxx))
}

/// Seeded low-frequency test directions: a constant plus the first cosine
/// modes in each axis, with a slow time modulation.
pub fn smooth_directions<T: Real>(
    grid: &Grid2D<T>,
    dt: T,
    steps: usize,
    count: usize,
    seed: u64,
) -> Vec<ControlField<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let (lx, ly) = (to_f64(grid.lx()), to_f64(grid.ly()));
    let tf = (to_f64(dt) * steps as f64).max(f64::MIN_POSITIVE);
    (0..count)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a0 = sign * rng.random_range(0.5..1.0);
            let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let ph = rng.random_range(0.0..2.0 * pi);
            ControlField::from_fn(grid, dt, steps, |x, y, t| {
                let c = (pi * to_f64(x) / lx).cos();
                let d = (pi * to_f64(y) / ly).cos();
                let mix = a0 + a[0] * c + a[1] * d + a[2] * c * d;
                lit(mix * (1.0 + 0.5 * (ph + 2.0 * pi * to_f64(t) / tf).cos()))
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FdTable<T> {
    pub betas: Vec<T>,
    pub quotients: Vec<T>,
    /// Richardson limit of the last two quotients, assuming `O(beta^2)` error.
    pub extrapolated: T,
}

/// Central difference quotients of the reduced cost along `h`.
pub fn fd_directional_derivative<T: Real>(
    problem: &ControlProblem<T>,
    control: &ControlField<T>,
    h: &ControlField<T>,
    betas: &[T],
) -> Result<FdTable<T>> {
    check_betas(betas)?;
    let j = |b: T| -> Result<T> {
        let mut v = control.clone();
        v.axpy(b, h);
        Ok(problem.cost(&v)?.total)
    };
    let quotients = betas
        .iter()
        .map(|&b| Ok((j(b)? - j(-b)?) / (lit::<T>(2.0) * b)))
        .collect::<Result<Vec<T>>>()?;
    let k = betas.len() - 1;
    let r2 = (betas[k - 1] / betas[k]).powi(2);
    let extrapolated = (r2 * quotients[k] - quotients[k - 1]) / (r2 - T::one());
    Ok(FdTable {
        betas: betas.to_vec(),
        quotients,
        extrapolated,
    })
}

#[derive(Clone, Debug)]
pub struct TaylorTable<T> {
    pub betas: Vec<T>,
    pub remainders: Vec<T>,
    /// `None` when every remainder vanishes.
    pub slope: Option<T>,
}

/// `L^2(Q)` norm of a state difference sampled at levels `1..=N`; level 0
/// never differs.
fn state_norm<T: Real>(dt: T, phi: &[ScalarField<T>], u: &[FaceVectorField<T>]) -> T {
    let s: T = (1..phi.len()).map(|k| phi[k].dot(&phi[k]) + u[k].dot(&u[k])).sum();
    (s * dt).sqrt()
}

/// `R(beta) = ||S(U + beta h) - S(U) - beta (psi_h, w_h)||`.
pub fn taylor_remainder_test<T: Real>(
    problem: &ControlProblem<T>,
    control: &ControlField<T>,
    h: &ControlField<T>,
    betas: &[T],
) -> Result<TaylorTable<T>> {
    check_betas(betas)?;
    let base = problem.forward(control)?;
    let lin = problem.linearize(&base, h)?;
    let dt = base.dt;
    let mut remainders = Vec::with_capacity(betas.len());
    for &b in betas {
        let mut v = control.clone();
        v.axpy(b, h);
        let tr = problem.forward(&v)?;
        let dphi: Vec<ScalarField<T>> = (0..=base.steps())
            .map(|n| {
                let mut d = tr.states[n].phi.sub(&base.states[n].phi);
                d.axpy(-b, &lin.psi[n]);
                d
            })
            .collect();
        let du: Vec<FaceVectorField<T>> = (0..=base.steps())
            .map(|n| {
                let mut d = tr.states[n].u.sub(&base.states[n].u);
                d.axpy(-b, &lin.w[n]);
                d
            })
            .collect();
        remainders.push(state_norm(dt, &dphi, &du));
    }
    let slope = loglog_slope(betas, &remainders);
    Ok(TaylorTable {
        betas: betas.to_vec(),
        remainders,
        slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityRow<T> {
    pub h_id: usize,
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
    pub rel_gap: T,
}

/// Compares `<xi, h>` from the mollified adjoint with the transposition
/// right-hand side built from the tangent solution, evaluated pointwise at
/// the observation points. The gap measures the mollification error.
pub fn duality_gap<T: Real>(
    problem: &ControlProblem<T>,
    control: &ControlField<T>,
    epsilon: T,
    directions: &[ControlField<T>],
) -> Result<Vec<DualityRow<T>>> {
    if directions.len() < 3 {
        return Err(ChnsError::InvalidArgument("need at least three directions".into()));
    }
    let moll = problem.objective.with_observation(Observation::Mollified { epsilon })?;
    let base = problem.forward(control)?;
    let adj = crate::adjoint::solve_adjoint(&problem.disc, &problem.models, &base, &moll)?;
    let xi = ControlField::from_snapshots(problem.disc.grid(), base.dt, adj.xi[..base.steps()].to_vec())?;
    let spec = moll.spec();
    let w = spec.weights;
    let n_last = base.steps();
    let dt = base.dt;
    let misfits: Vec<Vec<T>> = (0..=n_last).map(|n| moll.misfits(&base.states[n].phi, n)).collect();

    let mut rows = Vec::with_capacity(directions.len());
    for (id, h) in directions.iter().enumerate() {
        let lhs = xi.dot(h);
        let lin = problem.linearize(&base, h)?;
        let point_term = |n: usize| -> Result<T> {
            let mut s = T::zero();
            for (i, p) in spec.points.iter().enumerate() {
                s += misfits[n][i] * interp_bilinear(&lin.psi[n], p)?;
            }
            Ok(s)
        };
        let mut rhs = T::zero();
        for n in 0..n_last {
            rhs += dt * w.tracking * point_term(n)?;
            rhs += dt * w.velocity * moll.velocity_misfit(&base.states[n].u, n).dot(&lin.w[n]);
        }
        if spec.mode == CostMode::J2 {
            rhs += w.tracking * point_term(n_last)?;
        }
        rhs += w.velocity * moll.velocity_misfit(&base.states[n_last].u, n_last).dot(&lin.w[n_last]);
        let gap = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let rel_gap = if scale > T::zero() { gap / scale } else { T::zero() };
        rows.push(DualityRow {
            h_id: id,
            lhs,
            rhs,
            gap,
            rel_gap,
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityRow<T> {
    pub magnitude: T,
    pub control_distance: T,
    /// `None` when the controls coincide.
    pub sup_phi: Option<T>,
    pub l2h2_phi: Option<T>,
    pub sup_u: Option<T>,
}

/// Continuous-dependence ratios of paired runs `U` and `U + a h`.
pub fn stability_ratio<T: Real>(
    problem: &ControlProblem<T>,
    control: &ControlField<T>,
    direction: &ControlField<T>,
    magnitudes: &[T],
) -> Result<Vec<StabilityRow<T>>> {
    let base = problem.forward(control)?;
    let disc = &problem.disc;
    let dt = base.dt;
    let mut rows = Vec::with_capacity(magnitudes.len());
    for &a in magnitudes {
        let mut v = control.clone();
        v.axpy(a, direction);
        let dist = v.sub(control).norm();
        if dist == T::zero() {
            rows.push(StabilityRow {
                magnitude: a,
                control_distance: dist,
                sup_phi: None,
                l2h2_phi: None,
                sup_u: None,
            });
            continue;
        }
        let tr = problem.forward(&v)?;
        let mut sup_phi = T::zero();
        let mut sup_u = T::zero();
        let mut h2 = T::zero();
        for n in 0..=base.steps() {
            let d = tr.states[n].phi.sub(&base.states[n].phi);
            sup_phi = sup_phi.max(d.norm());
            sup_u = sup_u.max(tr.states[n].u.sub(&base.states[n].u).norm());
            if n < base.steps() {
                let gd = disc.grad_cc_to_face(&d);
                let ld = disc.laplacian_neumann(&d);
                h2 += dt * (d.dot(&d) + gd.dot(&gd) + ld.dot(&ld));
            }
        }
        rows.push(StabilityRow {
            magnitude: a,
            control_distance: dist,
            sup_phi: Some(sup_phi / dist),
            l2h2_phi: Some(h2.sqrt() / dist),
            sup_u: Some(sup_u / dist),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// What property the check instruments.
    pub instruments: &'static str,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Inputs of the invariant suite.
#[derive(Clone, Debug)]
pub struct InvariantSuiteConfig<T> {
    pub disc: Discretization<T>,
    pub models: Models<T>,
    pub phi0: ScalarField<T>,
    pub u0: FaceVectorField<T>,
    pub control: ControlField<T>,
    pub time: SimulateOptions<T>,
    /// Required separation `1 - max|phi|` for singular potentials.
    pub separation_margin: T,
    /// Check monotone energy decay (meaningful in the decoupled, unforced case).
    pub check_energy: bool,
}

/// Runs the forward model once and checks conservation, incompressibility,
/// energy decay, separation and clamping. A failed run is reported as a
/// failed `run` check rather than an error.
pub fn run_invariant_suite<T: Real>(cfg: &InvariantSuiteConfig<T>) -> VerificationReport {
    let mut report = VerificationReport::default();
    let start = Instant::now();
    let run = simulate(&cfg.disc, &cfg.models, &cfg.phi0, &cfg.u0, &cfg.control, &cfg.time);
    let elapsed = start.elapsed().as_secs_f64();
    let traj = match run {
        Ok(t) => {
            report.push(Check {
                name: "run".into(),
                metric: "completed".into(),
                value: 1.0,
                tolerance: 1.0,
                pass: true,
                instruments: "forward solve completes",
                runtime_s: elapsed,
            });
            t
        }
        Err(e) => {
            log::error!("forward run failed: {e}");
            report.push(Check {
                name: "run".into(),
                metric: format!("error: {e}"),
                value: 0.0,
                tolerance: 1.0,
                pass: false,
                instruments: "forward solve completes",
                runtime_s: elapsed,
            });
            return report;
        }
    };
    invariant_checks(&mut report, cfg, &traj);
    report
}

fn invariant_checks<T: Real>(
    report: &mut VerificationReport,
    cfg: &InvariantSuiteConfig<T>,
    traj: &StateTrajectory<T>,
) {
    let m0 = mass(&traj.states[0].phi);
    let dm = mass(&traj.final_state().phi) - m0;
    let src = cfg.control.integral();
    let tol = 1e-10 * (1.0 + to_f64(m0).abs());
    let err = to_f64((dm - src).abs());
    report.push(Check {
        name: "mass_balance".into(),
        metric: "|dmass - int U|".into(),
        value: err,
        tolerance: tol,
        pass: err <= tol,
        instruments: "conservative phase transport",
        runtime_s: 0.0,
    });

    let maxdiv = traj
        .states
        .iter()
        .map(|s| to_f64(cfg.disc.max_div(&s.u)))
        .fold(0.0, f64::max);
    report.push(Check {
        name: "divergence".into(),
        metric: "max_n ||div u||_inf".into(),
        value: maxdiv,
        tolerance: 1e-8,
        pass: maxdiv <= 1e-8,
        instruments: "incompressibility",
        runtime_s: 0.0,
    });

    if cfg.check_energy {
        let e: Vec<f64> = traj
            .states
            .iter()
            .map(|s| to_f64(energy(s, &cfg.models.potential)))
            .collect();
        let worst = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let worst = if e.len() < 2 { 0.0 } else { worst };
        report.push(Check {
            name: "energy_decay".into(),
            metric: "max_n (E^{n+1} - E^n)".into(),
            value: worst,
            tolerance: 1e-10,
            pass: worst <= 1e-10,
            instruments: "discrete energy stability",
            runtime_s: 0.0,
        });
    }

    if let PotentialModel::Logarithmic { .. } = cfg.models.potential {
        let maxphi = traj.states.iter().map(|s| to_f64(s.phi.max_abs())).fold(0.0, f64::max);
        let bound = 1.0 - to_f64(cfg.separation_margin);
        report.push(Check {
            name: "separation".into(),
            metric: "max |phi|".into(),
            value: maxphi,
            tolerance: bound,
            pass: maxphi <= bound,
            instruments: "uniform separation from the pure phases",
            runtime_s: 0.0,
        });
        report.push(Check {
            name: "clamp_events".into(),
            metric: "count".into(),
            value: traj.clamp_events as f64,
            tolerance: 0.0,
            pass: traj.clamp_events == 0,
            instruments: "singular potential never clamped",
            runtime_s: 0.0,
        });
    }

    let finite = traj.states.iter().all(|s| s.phi.all_finite() && s.u.all_finite());
    report.push(Check {
        name: "finite".into(),
        metric: "all values finite".into(),
        value: if finite { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: finite,
        instruments: "no overflow or NaN",
        runtime_s: 0.0,
    });
}
