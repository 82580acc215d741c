mod common;

use chns_core::*;
use common::*;

fn constant_run(g: &Grid, c: f64, dt: f64, steps: usize) -> Trajectory {
    let disc = Discretization::new(g);
    simulate(
        &disc,
        &constant_models(),
        &Field::constant(g, c),
        &FaceField::zeros(g),
        &Control::zeros(g, dt, steps),
        &SimulateOptions { dt, steps },
    )
    .unwrap()
}

#[test]
fn constant_state_tracking_closed_form() {
    let g = make_grid(16, 16, 2.0, 2.0).unwrap();
    let (c, target, dt, steps) = (0.35, -0.1, 0.01, 40);
    let tr = constant_run(&g, c, dt, steps);
    let pts = vec![
        ObservationPoint::new(0.5, 0.5),
        ObservationPoint::new(1.3, 0.8),
        ObservationPoint::new(1.0, 1.5),
    ];
    for obs in [Observation::Point, Observation::Mollified { epsilon: 0.25 }] {
        let spec = CostSpec::constant_targets(pts.clone(), &[target; 3], steps, CostMode::J1, obs);
        let cost = Objective::new(&g, steps, spec)
            .unwrap()
            .eval(&tr, &Control::zeros(&g, dt, steps))
            .unwrap();
        let expect = 3.0 * (dt * steps as f64) * (c - target).powi(2) / 2.0;
        assert!(
            (cost.tracking_running - expect).abs() < 1e-12,
            "{} vs {expect}",
            cost.tracking_running
        );
        assert_eq!(cost.tracking_terminal, 0.0);
        assert!(cost.velocity_running.abs() < 1e-20 && cost.velocity_terminal.abs() < 1e-20);
    }
}

#[test]
fn matched_state_costs_nothing_and_unit_control_costs_half() {
    let g = make_grid(10, 10, 1.0, 1.0).unwrap();
    let (dt, steps) = (0.1, 10);
    let tr = constant_run(&g, 0.2, dt, steps);
    let spec = CostSpec::constant_targets(
        vec![ObservationPoint::new(0.5, 0.5)],
        &[0.2],
        steps,
        CostMode::J2,
        Observation::Point,
    );
    let obj = Objective::new(&g, steps, spec).unwrap();
    let zero = obj.eval(&tr, &Control::zeros(&g, dt, steps)).unwrap();
    assert!(zero.total.abs() < 1e-24);
    let one = obj.eval(&tr, &Control::constant(&g, dt, steps, 1.0)).unwrap();
    assert!((one.control_energy - 0.5).abs() < 1e-14);
    assert!((one.total - 0.5).abs() < 1e-14);
}

#[test]
fn cost_is_quadratic_in_misfits() {
    let inst = instance(16, 4.0, 20, 2e-3, variable_models());
    let g = *inst.grid();
    let u = smooth_direction(&g, inst.dt, inst.steps, 3);
    let tr = inst.run(&u);
    let spec = tracking_spec(
        &inst,
        CostMode::J2,
        Observation::Mollified {
            epsilon: 2.0 * g.h_max(),
        },
    );
    let obj = Objective::new(&g, inst.steps, spec.clone()).unwrap();
    let base = obj.eval(&tr, &u).unwrap();
    let op = obj.observation_operator();
    for alpha in [0.5, -2.0, 3.25] {
        let mut s = spec.clone();
        for n in 0..=inst.steps {
            let seen = op.observe(&tr.states[n].phi);
            for (i, row) in s.targets.iter_mut().enumerate() {
                row[n] = seen[i] - alpha * (seen[i] - spec.targets[i][n]);
            }
        }
        s.desired_velocity = Some(
            (0..=inst.steps)
                .map(|n| {
                    let mut d = tr.states[n].u.clone();
                    d.axpy(-alpha, &obj.velocity_misfit(&tr.states[n].u, n));
                    d
                })
                .collect(),
        );
        let c = Objective::new(&g, inst.steps, s)
            .unwrap()
            .eval(&tr, &u.scaled(alpha))
            .unwrap();
        let a2 = alpha * alpha;
        for (x, y) in [
            (c.tracking_running, base.tracking_running),
            (c.tracking_terminal, base.tracking_terminal),
            (c.velocity_running, base.velocity_running),
            (c.velocity_terminal, base.velocity_terminal),
            (c.control_energy, base.control_energy),
        ] {
            assert!((x - a2 * y).abs() <= 1e-12 * (a2 * y).abs(), "{x} vs {}", a2 * y);
        }
    }
}

#[test]
fn ball_average_converges_to_point_value() {
    let g = make_grid(256, 256, 1.0, 1.0).unwrap();
    let phi = Field::from_fn(&g, |x, y| (3.0 * x).sin() * (2.0 * y).cos() + x * x);
    let p = ObservationPoint::new(0.41, 0.57);
    let point = interp_bilinear(&phi, &p).unwrap();
    let eps = [0.16, 0.08, 0.04];
    let err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let op = ObservationOperator::new(&g, &[p], Observation::Mollified { epsilon: e }).unwrap();
            (op.observe(&phi)[0] - point).abs()
        })
        .collect();
    let slope = verify::loglog_slope(&eps, &err).unwrap();
    assert!(slope >= 0.9, "slope {slope}: {err:?}");
}

#[test]
fn observation_records_match_misfits() {
    let inst = instance(12, 4.0, 5, 2e-3, constant_models());
    let tr = inst.run(&inst.zero_control());
    let spec = tracking_spec(&inst, CostMode::J1, Observation::Point);
    let obj = Objective::new(inst.grid(), inst.steps, spec).unwrap();
    let recs = obj.observations(&tr).unwrap();
    assert_eq!(recs.len(), 2 * (inst.steps + 1));
    for r in &recs {
        assert_eq!(r.misfit, r.observed - r.target);
        assert_eq!(r.misfit, obj.misfits(&tr.states[r.step].phi, r.step)[r.point_index]);
    }
}

#[test]
fn inverted_box_is_rejected() {
    let g = make_grid(4, 4, 1.0, 1.0).unwrap();
    assert!(AdmissibleBox::constant(&g, 0.1, 3, 1.0, -1.0).is_err());
}
