mod common;

use chns_core::forward::cfl_number;
use chns_core::*;
use common::*;

fn unit(n: usize) -> (Grid, Discretization<f64>) {
    let g = make_grid(n, n, 1.0, 1.0).unwrap();
    let d = Discretization::new(&g);
    (g, d)
}

#[test]
fn constant_state_is_a_fixed_point() {
    let (g, disc) = unit(12);
    let models = constant_models();
    let phi0 = Field::constant(&g, 0.3);
    let u = Control::zeros(&g, 1e-3, 20);
    let tr = simulate(
        &disc,
        &models,
        &phi0,
        &FaceField::zeros(&g),
        &u,
        &SimulateOptions { dt: 1e-3, steps: 20 },
    )
    .unwrap();
    for s in &tr.states {
        assert!(s.phi.sub(&phi0).max_abs() < 1e-13);
        assert!(s.u.max_abs() < 1e-13);
    }
}

#[test]
fn zero_steps_returns_initial_state() {
    let (g, disc) = unit(8);
    let phi0 = smooth_phi(&g, 0.4);
    let tr = simulate(
        &disc,
        &constant_models(),
        &phi0,
        &FaceField::zeros(&g),
        &Control::zeros(&g, 1e-3, 0),
        &SimulateOptions { dt: 1e-3, steps: 0 },
    )
    .unwrap();
    assert_eq!(tr.states.len(), 1);
    assert_eq!(tr.states[0].phi, phi0);
}

#[test]
fn unit_source_adds_dt_mass_per_step() {
    let (g, disc) = unit(16);
    let phi0 = smooth_phi(&g, 0.4);
    let u0 = disc.project(&swirl(&g, 0.5)).unwrap().0;
    let u = Control::constant(&g, 1e-3, 10, 1.0);
    let tr = simulate(
        &disc,
        &variable_models(),
        &phi0,
        &u0,
        &u,
        &SimulateOptions { dt: 1e-3, steps: 10 },
    )
    .unwrap();
    for w in tr.states.windows(2) {
        let dm = mass(&w[1].phi) - mass(&w[0].phi);
        assert!((dm - 1e-3).abs() < 1e-14, "{dm}");
    }
}

#[test]
fn mass_balance_with_rough_control() {
    let inst = instance(20, 4.0, 30, 2e-3, variable_models());
    let u = random_control(inst.grid(), inst.dt, inst.steps, 3);
    let tr = inst.run(&u);
    let m0 = mass(&inst.phi0);
    let err = (mass(&tr.final_state().phi) - m0 - u.integral()).abs();
    assert!(err <= 1e-10 * (1.0 + m0.abs()), "{err}");
}

#[test]
fn energy_decays_without_flow_or_control() {
    let (g, disc) = unit(24);
    let mut models = Models::new(
        MaterialModel::constant(1.0, 1.0),
        PotentialModel::DoubleWell,
        (-1.0, 1.0),
    )
    .unwrap();
    assert_eq!(models.stabilization, 1.0);
    models.coupling = Coupling::CahnHilliardOnly;
    let phi0 = Field::from_fn(&g, |x, y| 0.5 * (6.0 * x).cos() * (5.0 * y).sin() + 0.1);
    let tr = simulate(
        &disc,
        &models,
        &phi0,
        &FaceField::zeros(&g),
        &Control::zeros(&g, 1e-3, 100),
        &SimulateOptions { dt: 1e-3, steps: 100 },
    )
    .unwrap();
    let e: Vec<f64> = tr.states.iter().map(|s| energy(s, &models.potential)).collect();
    for (n, w) in e.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-10, "step {n}: {} -> {}", w[0], w[1]);
    }
    assert!(e[100] < e[0]);
}

#[test]
fn energy_and_mass_closed_forms() {
    let g = make_grid(4, 8, 2.0, 3.0).unwrap();
    let zero = State::new(Field::zeros(&g), FaceField::zeros(&g)).unwrap();
    assert!((energy(&zero, &PotentialModel::DoubleWell) - 0.25 * 6.0).abs() < 1e-14);
    let one = State::new(Field::constant(&g, 1.0), FaceField::zeros(&g)).unwrap();
    assert_eq!(energy(&one, &PotentialModel::DoubleWell), 0.0);
    assert!((mass(&Field::constant(&g, -0.7)) + 0.7 * 6.0).abs() < 1e-14);
}

#[test]
fn velocity_stays_solenoidal() {
    let inst = instance(24, 6.0, 40, 2e-3, variable_models());
    let tr = inst.run(&smooth_direction(inst.grid(), inst.dt, inst.steps, 2));
    for s in &tr.states {
        assert!(inst.disc.max_div(&s.u) <= 1e-8);
    }
}

#[test]
fn first_order_self_convergence_in_time() {
    let g = make_grid(16, 16, 4.0, 4.0).unwrap();
    let disc = Discretization::new(&g);
    let models = variable_models();
    let phi0 = smooth_phi(&g, 0.5);
    let u0 = disc.project(&swirl(&g, 0.5)).unwrap().0;
    let t_final = 0.04;
    let run = |dt: f64| {
        let opts = SimulateOptions::from_final_time(t_final, dt).unwrap();
        let c = Control::from_fn(&g, dt, opts.steps, |x, y, t| (x - 2.0) * (y - 1.0) * (1.0 + 10.0 * t));
        simulate(&disc, &models, &phi0, &u0, &c, &opts)
            .unwrap()
            .final_state()
            .phi
            .clone()
    };
    let dts = [4e-3, 2e-3, 1e-3];
    let errs: Vec<f64> = dts.iter().map(|&dt| run(dt).sub(&run(dt / 2.0)).norm()).collect();
    let slope = verify::loglog_slope(&dts, &errs).unwrap();
    assert!((0.8..=1.3).contains(&slope), "slope {slope}, errors {errs:?}");
}

#[test]
fn cfl_violation_is_an_error() {
    let (g, disc) = unit(8);
    let u0 = disc.project(&swirl(&g, 50.0)).unwrap().0;
    let dt = 0.05;
    assert!(cfl_number(&u0, dt) > 1.0);
    let r = simulate(
        &disc,
        &constant_models(),
        &smooth_phi(&g, 0.3),
        &u0,
        &Control::zeros(&g, dt, 2),
        &SimulateOptions { dt, steps: 2 },
    );
    assert!(matches!(r, Err(ChnsError::Cfl { .. })), "{r:?}");
}

#[test]
fn simulation_is_bitwise_reproducible() {
    let inst = instance(16, 4.0, 20, 2e-3, variable_models());
    let u = random_control(inst.grid(), inst.dt, inst.steps, 9);
    let a = inst.run(&u);
    let b = inst.run(&u);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.phi, y.phi);
        assert_eq!(x.u, y.u);
    }
}
