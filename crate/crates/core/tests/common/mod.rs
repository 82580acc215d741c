#![allow(dead_code)]

use chns_core::material::CoefficientLaw;
use chns_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub struct Instance {
    pub disc: Discretization<f64>,
    pub models: Models<f64>,
    pub phi0: Field,
    pub u0: FaceField,
    pub steps: usize,
    pub dt: f64,
}

/// Smooth two-mode initial phase field.
pub fn smooth_phi(g: &Grid, amp: f64) -> Field {
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        amp * ((PI * x / lx).cos() + 0.6 * (2.0 * PI * y / ly).cos() * (PI * x / lx).sin() + 0.3)
    })
}

/// Divergence-free swirl vanishing on the walls.
pub fn swirl(g: &Grid, amp: f64) -> FaceField {
    let (lx, ly) = (g.lx(), g.ly());
    FaceField::from_fns(
        g,
        |x, y| amp * (PI * x / lx).sin().powi(2) * (2.0 * PI * y / ly).sin(),
        |x, y| -amp * (lx / ly) * (2.0 * PI * x / lx).sin() * (PI * y / ly).sin().powi(2),
    )
}

pub fn variable_models() -> Models<f64> {
    let material = MaterialModel {
        mobility: CoefficientLaw::TanhBlend {
            minus: 0.6,
            plus: 1.4,
            width: 0.5,
        },
        viscosity: CoefficientLaw::TanhBlend {
            minus: 0.5,
            plus: 1.5,
            width: 0.4,
        },
    };
    Models::new(material, PotentialModel::DoubleWell, (-1.5, 1.5)).unwrap()
}

pub fn constant_models() -> Models<f64> {
    Models::new(
        MaterialModel::constant(1.0, 1.0),
        PotentialModel::DoubleWell,
        (-1.5, 1.5),
    )
    .unwrap()
}

pub fn instance(n: usize, l: f64, steps: usize, dt: f64, models: Models<f64>) -> Instance {
    let g = make_grid(n, n, l, l).unwrap();
    let disc = Discretization::new(&g);
    let phi0 = smooth_phi(&g, 0.5);
    let u0 = disc.project(&swirl(&g, 1.0)).unwrap().0;
    Instance {
        disc,
        models,
        phi0,
        u0,
        steps,
        dt,
    }
}

impl Instance {
    pub fn grid(&self) -> &Grid {
        self.disc.grid()
    }
    pub fn opts(&self) -> SimulateOptions<f64> {
        SimulateOptions {
            dt: self.dt,
            steps: self.steps,
        }
    }
    pub fn run(&self, u: &Control) -> Trajectory {
        simulate(&self.disc, &self.models, &self.phi0, &self.u0, u, &self.opts()).unwrap()
    }
    pub fn zero_control(&self) -> Control {
        Control::zeros(self.grid(), self.dt, self.steps)
    }
}

/// Low-frequency cosine mixture, time-modulated.
pub fn smooth_direction(g: &Grid, dt: f64, steps: usize, seed: u64) -> Control {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0..3) as f64,
                rng.random_range(0..3) as f64,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let (lx, ly) = (g.lx(), g.ly());
    let tf = dt * steps as f64;
    Control::from_fn(g, dt, steps, |x, y, t| {
        modes
            .iter()
            .map(|&(kx, ky, a, ph)| {
                a * (kx * PI * x / lx).cos() * (ky * PI * y / ly).cos() * (ph + 2.0 * t / tf.max(1e-300)).cos()
            })
            .sum()
    })
}

pub fn random_control(g: &Grid, dt: f64, steps: usize, seed: u64) -> Control {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snaps = (0..steps)
        .map(|_| Field::from_values(g, (0..g.n_cells()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    Control::from_snapshots(g, dt, snaps).unwrap()
}

/// Two interior points with targets shifted from the initial observation.
pub fn tracking_spec(inst: &Instance, mode: CostMode, observation: Observation<f64>) -> CostSpec<f64> {
    let g = inst.grid();
    let pts = vec![
        ObservationPoint::new(0.3 * g.lx(), 0.4 * g.ly()),
        ObservationPoint::new(0.7 * g.lx(), 0.6 * g.ly()),
    ];
    let mut spec = CostSpec::constant_targets(pts, &[0.4, -0.3], inst.steps, mode, observation);
    let ud = swirl(g, 0.3);
    spec.desired_velocity = Some(vec![ud; inst.steps + 1]);
    spec
}

/// Near-uniform phase on the unit square with both sensors asked to rise by 0.2.
pub fn tracking_small(n: usize, mode: CostMode) -> ControlProblem<f64> {
    let g = make_grid(n, n, 1.0, 1.0).unwrap();
    let disc = Discretization::new(&g);
    let models = Models::new(
        MaterialModel::constant(1.0, 1.0),
        PotentialModel::DoubleWell,
        (-1.0, 1.0),
    )
    .unwrap();
    let phi0 = Field::from_fn(&g, |x, y| 0.2 + 0.3 * (PI * x).cos() * (PI * y).cos());
    let u0 = disc.project(&swirl(&g, 0.5)).unwrap().0;
    let time = SimulateOptions { dt: 1e-3, steps: 100 };
    let pts = vec![ObservationPoint::new(0.25, 0.375), ObservationPoint::new(0.75, 0.625)];
    let obs = Observation::Mollified {
        epsilon: 2.0 * g.h_max(),
    };
    let mut spec = CostSpec::constant_targets(pts, &[0.48, 0.48], time.steps, mode, obs);
    spec.weights.tracking = 1e3;
    let objective = Objective::new(&g, time.steps, spec).unwrap();
    ControlProblem {
        disc,
        models,
        phi0,
        u0,
        time,
        objective,
    }
}
