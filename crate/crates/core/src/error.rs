use thiserror::Error;

/// Errors raised by the discretization and the solvers built on it.
#[derive(Debug, Error)]
pub enum ChnsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CFL condition violated at step {step}: max|u|*dt/h = {cfl:.6e} > 1")]
    Cfl { step: usize, cfl: f64 },
    #[error("{solver} residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    SolverResidual {
        solver: &'static str,
        residual: f64,
        tolerance: f64,
    },
    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: &'static str, step: usize },
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<ChnsError>,
    },
    #[error("observation setup: {0}")]
    Observation(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ChnsError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ ChnsError::Step { .. } => e,
            ChnsError::Cfl { cfl, .. } => ChnsError::Cfl { step, cfl },
            ChnsError::NonFinite { field, .. } => ChnsError::NonFinite { field, step },
            other => ChnsError::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = ChnsError> = std::result::Result<T, E>;
