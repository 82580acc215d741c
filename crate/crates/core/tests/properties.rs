use chns_core::io::{decode_scalar, decode_vector, encode_scalar, encode_vector};
use chns_core::*;
use proptest::prelude::*;

fn grid_and_values() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..10, 3usize..10)
        .prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), prop::collection::vec(-1.0f64..1.0, nx * ny)))
}

fn face_values(g: &Grid, seed: &[f64]) -> FaceField {
    let vals = (0..g.n_faces())
        .map(|k| seed[k % seed.len()] * (1.0 + k as f64).sin())
        .collect();
    let mut f = FaceField::from_values(g, vals).unwrap();
    f.zero_boundary();
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_fluxes_telescope((nx, ny, v) in grid_and_values(), lx in 0.5f64..3.0, ly in 0.5f64..3.0) {
        let g = make_grid(nx, ny, lx, ly).unwrap();
        let d = Discretization::new(&g);
        let f = Field::from_values(&g, v).unwrap();
        let total = d.laplacian_neumann(&f).integral();
        let scale = f.norm() / (g.h_min() * g.h_min());
        prop_assert!(total.abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn grad_and_div_are_negative_adjoints((nx, ny, v) in grid_and_values()) {
        let g = make_grid(nx, ny, 1.3, 0.9).unwrap();
        let d = Discretization::new(&g);
        let f = Field::from_values(&g, v.clone()).unwrap();
        let gf = face_values(&g, &v);
        let a = d.grad_cc_to_face(&f).dot(&gf);
        let b = -f.dot(&d.div_face_to_cc(&gf));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-12));
    }

    #[test]
    fn square_grid_operators_commute_with_transpose(n in 3usize..9, v in prop::collection::vec(-1.0f64..1.0, 81)) {
        let g = make_grid(n, n, 1.0, 1.0).unwrap();
        let d = Discretization::new(&g);
        let f = Field::from_values(&g, v[..n * n].to_vec()).unwrap();
        let lt = d.laplacian_neumann(&f.transposed());
        prop_assert!(lt.sub(&d.laplacian_neumann(&f).transposed()).max_abs() <= 1e-12 * lt.max_abs().max(1.0));
        let gt = d.grad_cc_to_face(&f.transposed());
        prop_assert!(gt.sub(&d.grad_cc_to_face(&f).transposed()).max_abs() <= 1e-12 * gt.max_abs().max(1.0));
    }

    #[test]
    fn constant_coefficient_solves_meet_residual_contract((nx, ny, v) in grid_and_values()) {
        let g = make_grid(nx, ny, 1.0, 1.7).unwrap();
        let d = Discretization::new(&g);
        let rhs = Field::from_values(&g, v.clone()).unwrap();
        let x = d.solve_modified_biharmonic(1.0, 0.1, 1e-3, &rhs).unwrap();
        let r = d.apply_modified_biharmonic(1.0, 0.1, 1e-3, &x).sub(&rhs).norm();
        prop_assert!(r <= 1e-10 * rhs.norm().max(1e-300));

        let fr = face_values(&g, &v);
        let w = d.solve_helmholtz_noslip(0.05, &fr).unwrap();
        let mut lw = d.vector_laplacian(&w);
        lw.scale(-0.05);
        lw.axpy(1.0, &w);
        prop_assert!(lw.sub(&fr).norm() <= 1e-10 * fr.norm().max(1e-300));
    }

    #[test]
    fn double_well_matches_closed_forms(s in -3.0f64..3.0) {
        let exact = [(1.0 - s * s).powi(2) / 4.0, s * s * s - s, 3.0 * s * s - 1.0, 6.0 * s];
        for (k, e) in exact.iter().enumerate() {
            let v = potential_eval(&PotentialModel::DoubleWell, s, k).unwrap().value;
            prop_assert!((v - e).abs() <= 1e-14 * e.abs().max(1.0), "order {}: {} vs {}", k, v, e);
        }
    }

    #[test]
    fn logarithmic_curvature_bounded_below(s in -0.999f64..0.999, theta in 0.2f64..2.0, theta_c in 0.0f64..4.0) {
        let pot = PotentialModel::Logarithmic { theta, theta_c, delta_min: 1e-3 };
        let rep = validate_assumptions(&MaterialModel::constant(1.0, 1.0), &pot, (-0.999, 0.999), 65);
        let alpha0 = rep.alpha0.unwrap();
        prop_assert!((alpha0 - theta).abs() <= 1e-12 * theta);
        let f2 = pot.eval(s, 2).value;
        prop_assert!(f2 >= alpha0 - theta_c - 1e-12);
    }

    #[test]
    fn clamped_logarithmic_derivative_is_lipschitz(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (theta, theta_c, delta) = (1.0, 2.0, 1e-2);
        let pot = PotentialModel::Logarithmic { theta, theta_c, delta_min: delta };
        let lip = theta / (delta * (2.0 - delta)) + theta_c;
        let d = (pot.eval(a, 1).value - pot.eval(b, 1).value).abs();
        prop_assert!(d <= lip * (a - b).abs() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn derivatives_match_centered_differences(s in -0.9f64..0.9, k in 0usize..3) {
        let pot = PotentialModel::Logarithmic { theta: 1.0, theta_c: 2.0, delta_min: 1e-3 };
        let err = |h: f64| {
            let q = (pot.eval(s + h, k).value - pot.eval(s - h, k).value) / (2.0 * h);
            (q - pot.eval(s, k + 1).value).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        prop_assume!(e1 > 1e-8);
        let order = (e1 / e2).log2();
        prop_assert!((1.8..=2.2).contains(&order), "order {}", order);
    }

    #[test]
    fn box_projection_is_nonexpansive(
        a in prop::collection::vec(-3.0f64..3.0, 48),
        b in prop::collection::vec(-3.0f64..3.0, 48),
        lo in -1.0f64..0.0,
        width in 0.0f64..2.0,
    ) {
        let g = make_grid(4, 4, 1.0, 1.0).unwrap();
        let mk = |v: &[f64]| {
            let snaps = v.chunks(16).map(|c| Field::from_values(&g, c.to_vec()).unwrap()).collect();
            Control::from_snapshots(&g, 0.1, snaps).unwrap()
        };
        let bx = AdmissibleBox::constant(&g, 0.1, 3, lo, lo + width).unwrap();
        let (ua, ub) = (mk(&a), mk(&b));
        let (pa, pb) = (project_box(&ua, &bx).unwrap(), project_box(&ub, &bx).unwrap());
        prop_assert!(pa.sub(&pb).norm() <= ua.sub(&ub).norm() * (1.0 + 1e-14));
        prop_assert_eq!(project_box(&pa, &bx).unwrap(), pa.clone());
        prop_assert!(bx.contains(&pa));
    }

    #[test]
    fn snapshot_encoding_roundtrips_bitwise((nx, ny, v) in grid_and_values()) {
        let g = make_grid(nx, ny, 0.7, 2.5).unwrap();
        let mut vals = v.clone();
        vals[0] = -0.0;
        vals[nx * ny - 1] = f64::MIN_POSITIVE / 8.0;
        let f = Field::from_values(&g, vals).unwrap();
        let back = decode_scalar(&encode_scalar(&f), &g).unwrap();
        prop_assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let u = face_values(&g, &v);
        let back = decode_vector(&encode_vector(&u), &g).unwrap();
        prop_assert!(u.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
