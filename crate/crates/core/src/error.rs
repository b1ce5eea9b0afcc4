use thiserror::Error;

/// Errors raised by the moment-system solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid moment order {0}: must be at least 1")]
    InvalidOrder(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid moment vector: {0}")]
    InvalidState(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("no steady state after {steps} steps (residual {residual:e})")]
    NoSteadyState { steps: usize, residual: f64 },

    #[error("CFL number {0} outside (0, 1]")]
    InvalidCfl(f64),

    #[error("time step {dt:e} exceeds the stability bound {max_dt:e}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid resolution map: {0}")]
    InvalidResolution(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("projection left discrete divergence {divergence:e}")]
    Projection { divergence: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("experimental order of convergence undefined (non-positive error)")]
    UndefinedEoc,

    #[error("grids are not nested: {0}")]
    NotNested(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("solver failed at step {step} (t = {time}): {source}")]
    Solver {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
