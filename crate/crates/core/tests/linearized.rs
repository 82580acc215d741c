mod common;

use chns_core::verify::taylor_remainder_test;
use chns_core::*;
use common::*;
use std::f64::consts::PI;

fn lin(inst: &Instance, base: &Trajectory, h: &Control, psi0: &Field, w0: &FaceField) -> LinTrajectory<f64> {
    solve_linearized(&inst.disc, &inst.models, base, h, psi0, w0).unwrap()
}

fn max_rel(a: &LinTrajectory<f64>, b: &LinTrajectory<f64>) -> f64 {
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for n in 0..a.psi.len() {
        scale = scale.max(a.psi[n].max_abs()).max(a.w[n].max_abs());
        diff = diff
            .max(a.psi[n].sub(&b.psi[n]).max_abs())
            .max(a.w[n].sub(&b.w[n]).max_abs());
    }
    diff / scale
}

#[test]
fn zero_data_gives_zero_response() {
    let inst = instance(12, 4.0, 10, 2e-3, variable_models());
    let base = inst.run(&inst.zero_control());
    let g = *inst.grid();
    let l = lin(
        &inst,
        &base,
        &inst.zero_control(),
        &Field::zeros(&g),
        &FaceField::zeros(&g),
    );
    assert!(l.psi.iter().all(|p| p.max_abs() == 0.0));
    assert!(l.w.iter().all(|w| w.max_abs() == 0.0));
}

#[test]
fn homogeneous_and_additive() {
    let inst = instance(16, 4.0, 25, 2e-3, variable_models());
    let g = *inst.grid();
    let base = inst.run(&smooth_direction(&g, inst.dt, inst.steps, 1));
    let h1 = random_control(&g, inst.dt, inst.steps, 2);
    let h2 = smooth_direction(&g, inst.dt, inst.steps, 3);
    let p1 = smooth_phi(&g, 0.1);
    let p2 = Field::from_fn(&g, |x, y| (x * y).sin() * 0.05);
    let w1 = inst.disc.project(&swirl(&g, 0.2)).unwrap().0;
    let w2 = FaceField::zeros(&g);

    let a = lin(&inst, &base, &h1, &p1, &w1);
    let alpha = -2.75;
    let scaled = lin(&inst, &base, &h1.scaled(alpha), &p1.scaled(alpha), &w1.scaled(alpha));
    let mut expect = a.clone();
    for n in 0..expect.psi.len() {
        expect.psi[n].scale(alpha);
        expect.w[n].scale(alpha);
    }
    assert!(max_rel(&expect, &scaled) < 1e-12);

    let b = lin(&inst, &base, &h2, &p2, &w2);
    let sum = lin(&inst, &base, &h1.add(&h2), &p1.add(&p2), &w1.add(&w2));
    let mut expect = a.clone();
    for n in 0..expect.psi.len() {
        expect.psi[n].axpy(1.0, &b.psi[n]);
        expect.w[n].axpy(1.0, &b.w[n]);
    }
    assert!(max_rel(&expect, &sum) < 1e-12);

    for w in &sum.w {
        assert!(inst.disc.max_div(w) <= 1e-8);
    }
}

#[test]
fn cosine_mode_follows_scalar_recurrence() {
    let (n, l, dt, m, c) = (16usize, 2.0, 1e-3, 1.5, 0.3);
    let g = make_grid(n, n, l, l).unwrap();
    let disc = Discretization::new(&g);
    let models = Models::new(MaterialModel::constant(m, 1.0), PotentialModel::DoubleWell, (-1.0, 1.0)).unwrap();
    let steps = 30;
    let base = simulate(
        &disc,
        &models,
        &Field::constant(&g, c),
        &FaceField::zeros(&g),
        &Control::zeros(&g, dt, steps),
        &SimulateOptions { dt, steps },
    )
    .unwrap();
    let mode = Field::from_fn(&g, |x, _| (PI * x / l).cos());
    let amp = 0.7;
    let mut snaps = vec![Field::zeros(&g); steps];
    snaps[0] = mode.scaled(amp);
    let h = Control::from_snapshots(&g, dt, snaps).unwrap();
    let out = solve_linearized(&disc, &models, &base, &h, &Field::zeros(&g), &FaceField::zeros(&g)).unwrap();

    // Neumann 5-point eigenvalue of the first x-mode; F'' of the double well at c
    let hx = l / n as f64;
    let lam = 2.0 / (hx * hx) * (1.0 - (PI * hx / l).cos());
    let f2 = 3.0 * c * c - 1.0;
    let s = models.stabilization;
    let denom = 1.0 + dt * m * lam * (s + lam);
    let mut a = 0.0;
    for k in 0..steps {
        let forcing = if k == 0 { dt * amp } else { 0.0 };
        a = (a * (1.0 + dt * m * lam * (s - f2)) + forcing) / denom;
        let err = out.psi[k + 1].sub(&mode.scaled(a)).max_abs();
        assert!(err <= 1e-13 * (dt * amp), "step {k}: {err}");
        assert!(disc.max_div(&out.w[k + 1]) <= 1e-12);
    }
}

#[test]
fn taylor_remainder_is_second_order() {
    let inst = instance(16, 4.0, 100, 1e-3, variable_models());
    let g = *inst.grid();
    let spec = tracking_spec(
        &inst,
        CostMode::J1,
        Observation::Mollified {
            epsilon: 2.0 * g.h_max(),
        },
    );
    let problem = ControlProblem {
        objective: Objective::new(&g, inst.steps, spec).unwrap(),
        time: inst.opts(),
        disc: inst.disc.clone(),
        models: inst.models.clone(),
        phi0: inst.phi0.clone(),
        u0: inst.u0.clone(),
    };
    let u = smooth_direction(&g, inst.dt, inst.steps, 4);
    let h = smooth_direction(&g, inst.dt, inst.steps, 5);
    let t = taylor_remainder_test(&problem, &u, &h, &[1e-1, 1e-2, 1e-3]).unwrap();
    let slope = t.slope.unwrap();
    assert!((1.7..=2.3).contains(&slope), "slope {slope}: {:?}", t.remainders);
}
