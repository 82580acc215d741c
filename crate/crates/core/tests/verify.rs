mod common;

use chns_core::verify::*;
use chns_core::*;
use common::*;

fn problem_from(inst: &Instance, spec: CostSpec<f64>) -> ControlProblem<f64> {
    ControlProblem {
        objective: Objective::new(inst.grid(), inst.steps, spec).unwrap(),
        time: inst.opts(),
        disc: inst.disc.clone(),
        models: inst.models.clone(),
        phi0: inst.phi0.clone(),
        u0: inst.u0.clone(),
    }
}

fn generic() -> ControlProblem<f64> {
    let inst = instance(12, 4.0, 20, 2e-3, variable_models());
    let spec = tracking_spec(
        &inst,
        CostMode::J2,
        Observation::Mollified {
            epsilon: 2.0 * inst.grid().h_max(),
        },
    );
    problem_from(&inst, spec)
}

const BETAS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[test]
fn zero_direction_gives_zero_quotients_and_remainders() {
    let p = generic();
    let u = smooth_direction(p.disc.grid(), p.time.dt, p.time.steps, 1);
    let fd = fd_directional_derivative(&p, &u, &p.zero_control(), &BETAS).unwrap();
    assert!(fd.quotients.iter().all(|q| *q == 0.0));
    let t = taylor_remainder_test(&p, &u, &p.zero_control(), &BETAS).unwrap();
    assert!(t.remainders.iter().all(|r| *r == 0.0));
    assert!(t.slope.is_none());
}

#[test]
fn pure_control_energy_quotient_is_exact() {
    let mut p = generic();
    let mut spec = p.objective.spec().clone();
    spec.weights = CostWeights {
        tracking: 0.0,
        velocity: 0.0,
        control: 1.0,
    };
    p.objective = Objective::new(p.disc.grid(), p.time.steps, spec).unwrap();
    let g = *p.disc.grid();
    let u = random_control(&g, p.time.dt, p.time.steps, 2);
    let h = smooth_direction(&g, p.time.dt, p.time.steps, 3);
    let fd = fd_directional_derivative(&p, &u, &h, &BETAS).unwrap();
    let exact = u.dot(&h);
    for q in &fd.quotients {
        assert!((q - exact).abs() <= 1e-9 * exact.abs(), "{q} vs {exact}");
    }
}

#[test]
fn affine_regime_has_no_taylor_remainder() {
    let g = make_grid(12, 12, 2.0, 2.0).unwrap();
    let disc = Discretization::new(&g);
    let quadratic = PotentialModel::Polynomial {
        coefficients: vec![0.0, 0.3, 0.5],
    };
    let mut models = Models::new(MaterialModel::constant(1.0, 1.0), quadratic, (-1.0, 1.0)).unwrap();
    models.coupling = Coupling::CahnHilliardOnly;
    let time = SimulateOptions { dt: 1e-2, steps: 10 };
    let spec = CostSpec::constant_targets(
        vec![ObservationPoint::new(1.0, 1.0)],
        &[0.0],
        10,
        CostMode::J1,
        Observation::Point,
    );
    let p = ControlProblem {
        objective: Objective::new(&g, 10, spec).unwrap(),
        phi0: Field::constant(&g, 0.1),
        u0: FaceField::zeros(&g),
        disc,
        models,
        time,
    };
    let h = smooth_direction(&g, 1e-2, 10, 4);
    let t = taylor_remainder_test(&p, &p.zero_control(), &h, &BETAS).unwrap();
    assert!(t.remainders.iter().all(|r| *r <= 1e-12), "{:?}", t.remainders);
}

#[test]
fn zero_misfit_duality_is_trivial() {
    let inst = instance(16, 4.0, 20, 2e-3, constant_models());
    let g = *inst.grid();
    let eps = 2.0 * g.h_max();
    let obs = Observation::Mollified { epsilon: eps };
    let base = inst.run(&inst.zero_control());
    let mut spec = tracking_spec(&inst, CostMode::J2, obs);
    let op = ObservationOperator::new(&g, &spec.points, obs).unwrap();
    let seen: Vec<Vec<f64>> = base.states.iter().map(|s| op.observe(&s.phi)).collect();
    spec.targets = (0..spec.points.len())
        .map(|i| seen.iter().map(|o| o[i]).collect())
        .collect();
    spec.desired_velocity = Some(base.states.iter().map(|s| s.u.clone()).collect());
    let p = problem_from(&inst, spec);
    let dirs = smooth_directions(&g, inst.dt, inst.steps, 3, 1);
    for row in duality_gap(&p, &p.zero_control(), eps, &dirs).unwrap() {
        assert_eq!((row.lhs, row.rhs, row.gap), (0.0, 0.0, 0.0));
    }
}

#[test]
fn duality_gap_small_and_shrinks_under_refinement() {
    let gaps: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let p = tracking_small(n, CostMode::J1);
            let g = *p.disc.grid();
            let dirs = smooth_directions(&g, p.time.dt, p.time.steps, 3, 11);
            let rows = duality_gap(&p, &p.zero_control(), 2.0 * g.h_max(), &dirs).unwrap();
            for r in &rows {
                assert!(r.rel_gap <= 1e-2, "n {n}: {r:?}");
            }
            rows.iter().map(|r| r.gap).sum()
        })
        .collect();
    assert!(gaps[1] <= 0.7 * gaps[0], "{gaps:?}");
}

#[test]
fn stability_ratios_are_bounded_and_symmetric() {
    let p = generic();
    let g = *p.disc.grid();
    let u = smooth_direction(&g, p.time.dt, p.time.steps, 5);
    let h = smooth_direction(&g, p.time.dt, p.time.steps, 6);
    let same = stability_ratio(&p, &u, &h, &[0.0]).unwrap();
    assert!(same[0].sup_phi.is_none() && same[0].l2h2_phi.is_none() && same[0].sup_u.is_none());

    let rows = stability_ratio(&p, &u, &h, &[1e-1, 1e-2, 1e-3]).unwrap();
    let flipped = stability_ratio(&p, &u, &h.scaled(-1.0), &[1e-1, 1e-2, 1e-3]).unwrap();
    type Pick = fn(&StabilityRow<f64>) -> Option<f64>;
    let picks: [Pick; 3] = [|r| r.sup_phi, |r| r.l2h2_phi, |r| r.sup_u];
    for pick in picks {
        let v: Vec<f64> = rows.iter().map(|r| pick(r).unwrap()).collect();
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 10.0, "{v:?}");
        for (a, b) in rows.iter().zip(&flipped) {
            let (a, b) = (pick(a).unwrap(), pick(b).unwrap());
            assert!((a - b).abs() <= 0.2 * a.max(b));
        }
    }
}

fn suite(inst: &Instance, phi0: Field, u0: FaceField) -> InvariantSuiteConfig<f64> {
    InvariantSuiteConfig {
        disc: inst.disc.clone(),
        models: inst.models.clone(),
        phi0,
        u0,
        control: inst.zero_control(),
        time: inst.opts(),
        separation_margin: 1e-3,
        check_energy: true,
    }
}

#[test]
fn constant_state_suite_passes() {
    let inst = instance(12, 2.0, 10, 1e-3, constant_models());
    let g = *inst.grid();
    let report = run_invariant_suite(&suite(&inst, Field::constant(&g, -0.4), FaceField::zeros(&g)));
    assert!(report.passed(), "{report:?}");
}

#[test]
fn cfl_violation_marks_run_failed() {
    let inst = instance(8, 1.0, 5, 5e-2, constant_models());
    let g = *inst.grid();
    let fast = inst.disc.project(&swirl(&g, 100.0)).unwrap().0;
    let report = run_invariant_suite(&suite(&inst, smooth_phi(&g, 0.3), fast));
    assert!(!report.passed());
    assert!(!report.get("run").unwrap().pass);
}
