//! Discretized Cahn-Hilliard-Navier-Stokes forward, tangent and adjoint
//! solvers on a staggered rectangular grid, with pointwise-tracking cost
//! functionals and gradient-based control.

// `!(x > 0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod control;
pub mod discretization;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod io;
pub mod linearized;
pub mod material;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod scalar;
pub mod sparse;
pub mod spectral;
pub mod verify;

pub use adjoint::{build_mollified_source, cost_gradient, solve_adjoint, AdjointTrajectory, MollifiedSource};
pub use control::ControlField;
pub use discretization::{bilinear_weights, interp_bilinear, Discretization};
pub use error::{ChnsError, Result};
pub use field::{FaceVectorField, ObservationPoint, ScalarField};
pub use forward::{energy, mass, simulate, step, Coupling, Models, SimulateOptions, State, StateTrajectory};
pub use grid::{make_grid, Grid2D};
pub use linearized::{solve_linearized, LinTrajectory};
pub use material::{
    potential_eval, stabilization_constant, validate_assumptions, CoefficientLaw, MaterialModel, PotentialModel,
};
pub use objective::{
    project_box, stationarity_residual, AdmissibleBox, CostBreakdown, CostMode, CostSpec, CostWeights, Objective,
    Observation, ObservationOperator,
};
pub use optimizer::{optimize, OptimOptions, OptimReport, StepMode, Termination};
pub use problem::ControlProblem;
pub use scalar::Real;

pub type Grid = Grid2D<f64>;
pub type Field = ScalarField<f64>;
pub type FaceField = FaceVectorField<f64>;
pub type Control = ControlField<f64>;
pub type Trajectory = StateTrajectory<f64>;
