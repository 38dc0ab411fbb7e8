use nalgebra::DMatrix;
use thiserror::Error;

/// Errors raised by the solvers and the scenario/CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("step size underflow at t = {t} (h = {h:e}); the system is likely too stiff for the selected integrator")]
    Stiffness { t: f64, h: f64 },

    #[error("integrator exceeded {steps} steps at t = {t}")]
    StepLimit { t: f64, steps: usize },

    #[error("implicit step did not converge at t = {t}")]
    NewtonFailure { t: f64 },

    #[error("1 is (nearly) an eigenvalue of the period map: |mu - 1| = {distance:e}")]
    ResolventViolation { distance: f64 },

    #[error("periodic sweep did not converge after {periods} periods (last gap {gap:e}); the pair may not be stabilizable/detectable")]
    NonStabilizable {
        periods: usize,
        gap: f64,
        /// Values at the start of the period for the last two sweeps.
        last_two: Box<(DMatrix<f64>, DMatrix<f64>)>,
    },

    #[error("closed loop is not exponentially stable (spectral radius {spectral_radius})")]
    StabilityViolation { spectral_radius: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("trajectory is not dynamically consistent (defect {defect:e})")]
    InvalidTrajectory { defect: f64 },

    #[error("shooting did not converge after {iterations} iterations (defect {defect:e})")]
    OracleFailure { iterations: usize, defect: f64 },

    #[error("periodic shooting matrix is singular (relative singular value {min_singular:e})")]
    DegeneratePeriodicity { min_singular: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidProblem(_) => "invalid_problem",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Stiffness { .. } => "stiffness",
            Error::StepLimit { .. } => "step_limit",
            Error::NewtonFailure { .. } => "newton_failure",
            Error::ResolventViolation { .. } => "resolvent_violation",
            Error::NonStabilizable { .. } => "non_stabilizable_suspected",
            Error::StabilityViolation { .. } => "stability_violation",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::InvalidTrajectory { .. } => "invalid_trajectory",
            Error::OracleFailure { .. } => "oracle_failure",
            Error::DegeneratePeriodicity { .. } => "degenerate_periodicity",
            Error::Internal(_) => "internal",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
