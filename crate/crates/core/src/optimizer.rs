//! Projected-gradient descent over the admissible box.

use crate::control::ControlField;
use crate::error::{ChnsError, Result};
use crate::objective::{project_box, stationarity_residual, AdmissibleBox, CostBreakdown};
use crate::problem::ControlProblem;
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StepMode {
    /// Take `initial_step` every iteration without a line search.
    Fixed,
    /// Backtracking along the projection arc from `initial_step`.
    #[default]
    Armijo,
    /// Barzilai-Borwein proposal, safeguarded by the Armijo backtrack.
    BarzilaiBorwein,
}

#[derive(Clone, Debug)]
pub struct OptimOptions<T> {
    pub max_iters: usize,
    pub armijo_c1: T,
    pub backtrack: T,
    pub initial_step: T,
    /// Stop when `residual <= tolerance * (1 + ||U||)`.
    pub tolerance: T,
    pub step_mode: StepMode,
    /// Line searches giving up below this step report a collapse.
    pub min_step: T,
}

impl<T: Real> Default for OptimOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 50,
            armijo_c1: lit(1e-4),
            backtrack: lit(0.5),
            initial_step: T::one(),
            tolerance: lit(1e-3),
            step_mode: StepMode::Armijo,
            min_step: lit(1e-10),
        }
    }
}

impl<T: Real> OptimOptions<T> {
    pub fn validate(&self) -> Result<()> {
        let half = lit::<T>(0.5);
        if !(self.armijo_c1 > T::zero() && self.armijo_c1 <= half) {
            return Err(ChnsError::InvalidArgument(format!(
                "armijo_c1 must lie in (0, 0.5], got {}",
                self.armijo_c1
            )));
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(ChnsError::InvalidArgument(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if !(self.initial_step > T::zero() && self.tolerance > T::zero() && self.min_step > T::zero()) {
            return Err(ChnsError::InvalidArgument(
                "initial step, tolerance and minimum step must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Stationary,
    MaxIterations,
    StepCollapse,
    /// A forward or adjoint solve failed; the report holds the iterates so far.
    SolverFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord<T> {
    pub iter: usize,
    pub cost: CostBreakdown<T>,
    /// Step that produced this iterate; zero for the start.
    pub step: T,
    pub stationarity: T,
    pub grad_norm: T,
}

#[derive(Clone, Debug)]
pub struct OptimReport<T> {
    pub iterations: Vec<IterRecord<T>>,
    pub control: ControlField<T>,
    pub termination: Termination,
    pub final_stationarity: T,
    /// Set when `termination` is `SolverFailure`.
    pub error: Option<String>,
}

impl<T: Real> OptimReport<T> {
    pub fn initial_cost(&self) -> &CostBreakdown<T> {
        &self.iterations[0].cost
    }
    pub fn final_cost(&self) -> &CostBreakdown<T> {
        &self.iterations.last().expect("at least the start is recorded").cost
    }
}

struct Point<T> {
    u: ControlField<T>,
    cost: CostBreakdown<T>,
    grad: ControlField<T>,
}

fn evaluate<T: Real>(problem: &ControlProblem<T>, u: ControlField<T>) -> Result<Point<T>> {
    let traj = problem.forward(&u)?;
    let cost = problem.objective.eval(&traj, &u)?;
    let grad = problem.gradient(&u, &traj)?;
    Ok(Point { u, cost, grad })
}

/// Minimizes the reduced cost over `bx` starting from `u_init` (projected
/// onto the box first).
pub fn optimize<T: Real>(
    problem: &ControlProblem<T>,
    bx: &AdmissibleBox<T>,
    u_init: &ControlField<T>,
    opts: &OptimOptions<T>,
) -> Result<OptimReport<T>> {
    opts.validate()?;
    let start = project_box(u_init, bx)?;
    if &start != u_init {
        log::info!("initial control was outside the box; projected");
    }
    let mut cur = evaluate(problem, start)?;
    let mut res = stationarity_residual(&cur.u, &cur.grad, bx)?;
    let mut iterations = vec![IterRecord {
        iter: 0,
        cost: cur.cost,
        step: T::zero(),
        stationarity: res,
        grad_norm: cur.grad.norm(),
    }];
    let mut prev: Option<(ControlField<T>, ControlField<T>)> = None;
    let mut alpha_prev = opts.initial_step;
    let finish = |iterations, cur: Point<T>, termination, res, error| OptimReport {
        iterations,
        control: cur.u,
        termination,
        final_stationarity: res,
        error,
    };

    for k in 1..=opts.max_iters {
        if res <= opts.tolerance * (T::one() + cur.u.norm()) {
            return Ok(finish(iterations, cur, Termination::Stationary, res, None));
        }
        let mut alpha = match (opts.step_mode, &prev) {
            (StepMode::BarzilaiBorwein, Some((up, gp))) => {
                let s = cur.u.sub(up);
                let y = cur.grad.sub(gp);
                let sy = s.dot(&y);
                if sy > T::zero() {
                    (s.dot(&s) / sy).max(opts.min_step).min(lit(1e10))
                } else {
                    alpha_prev
                }
            }
            _ => opts.initial_step,
        };
        let accepted = loop {
            let mut trial = cur.u.clone();
            trial.axpy(-alpha, &cur.grad);
            let trial = project_box(&trial, bx)?;
            let traj = match problem.forward(&trial) {
                Ok(t) => t,
                Err(e) if opts.step_mode != StepMode::Fixed => {
                    log::debug!("trial step {} failed ({e}); backtracking", to_f64(alpha));
                    alpha *= opts.backtrack;
                    if alpha < opts.min_step {
                        break None;
                    }
                    continue;
                }
                Err(e) => {
                    let msg = e.to_string();
                    return Ok(finish(iterations, cur, Termination::SolverFailure, res, Some(msg)));
                }
            };
            let cost = problem.objective.eval(&traj, &trial)?;
            let d = cur.u.sub(&trial);
            let decrease = opts.armijo_c1 / alpha * d.dot(&d);
            if opts.step_mode == StepMode::Fixed || cost.total <= cur.cost.total - decrease {
                break Some((trial, traj, cost));
            }
            alpha *= opts.backtrack;
            if alpha < opts.min_step {
                break None;
            }
        };
        let Some((u_new, traj, cost)) = accepted else {
            return Ok(finish(iterations, cur, Termination::StepCollapse, res, None));
        };
        let grad = match problem.gradient(&u_new, &traj) {
            Ok(g) => g,
            Err(e) => {
                let msg = e.to_string();
                return Ok(finish(iterations, cur, Termination::SolverFailure, res, Some(msg)));
            }
        };
        let next = Point { u: u_new, cost, grad };
        res = stationarity_residual(&next.u, &next.grad, bx)?;
        iterations.push(IterRecord {
            iter: k,
            cost: next.cost,
            step: alpha,
            stationarity: res,
            grad_norm: next.grad.norm(),
        });
        log::debug!(
            "iter {k}: cost {:.6e} step {:.3e} stationarity {:.3e}",
            to_f64(next.cost.total),
            to_f64(alpha),
            to_f64(res)
        );
        alpha_prev = alpha;
        let old = std::mem::replace(&mut cur, next);
        prev = Some((old.u, old.grad));
    }
    let termination = if res <= opts.tolerance * (T::one() + cur.u.norm()) {
        Termination::Stationary
    } else {
        Termination::MaxIterations
    };
    Ok(finish(iterations, cur, termination, res, None))
}
