//! A complete reduced control problem: forward model, horizon and cost.

use crate::adjoint::{cost_gradient, solve_adjoint, AdjointTrajectory};
use crate::control::ControlField;
use crate::discretization::Discretization;
use crate::error::Result;
use crate::field::{FaceVectorField, ScalarField};
use crate::forward::{simulate, Models, SimulateOptions, StateTrajectory};
use crate::linearized::{solve_linearized, LinTrajectory};
use crate::objective::{CostBreakdown, Objective};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct ControlProblem<T> {
    pub disc: Discretization<T>,
    pub models: Models<T>,
    pub phi0: ScalarField<T>,
    pub u0: FaceVectorField<T>,
    pub time: SimulateOptions<T>,
    pub objective: Objective<T>,
}

impl<T: Real> ControlProblem<T> {
    pub fn zero_control(&self) -> ControlField<T> {
        ControlField::zeros(self.disc.grid(), self.time.dt, self.time.steps)
    }

    pub fn forward(&self, control: &ControlField<T>) -> Result<StateTrajectory<T>> {
        simulate(&self.disc, &self.models, &self.phi0, &self.u0, control, &self.time)
    }

    pub fn cost(&self, control: &ControlField<T>) -> Result<CostBreakdown<T>> {
        let traj = self.forward(control)?;
        self.objective.eval(&traj, control)
    }

    pub fn adjoint(&self, traj: &StateTrajectory<T>) -> Result<AdjointTrajectory<T>> {
        solve_adjoint(&self.disc, &self.models, traj, &self.objective)
    }

    /// Reduced gradient at `control` given its trajectory.
    pub fn gradient(&self, control: &ControlField<T>, traj: &StateTrajectory<T>) -> Result<ControlField<T>> {
        let adj = self.adjoint(traj)?;
        cost_gradient(control, &adj, self.objective.spec().weights.control)
    }

    /// State response to `h` with unperturbed initial data.
    pub fn linearize(&self, traj: &StateTrajectory<T>, h: &ControlField<T>) -> Result<LinTrajectory<T>> {
        let g = self.disc.grid();
        solve_linearized(
            &self.disc,
            &self.models,
            traj,
            h,
            &ScalarField::zeros(g),
            &FaceVectorField::zeros(g),
        )
    }
}
