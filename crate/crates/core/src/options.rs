use serde::{Deserialize, Serialize};

use crate::ode::OdeOptions;

/// Numerical settings shared by every solver in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub ode: OdeOptions,
    /// Spacing of the output grid on which paths are stored.
    pub sample_step: f64,
    /// Sup-norm gap between consecutive period sweeps that counts as converged.
    pub periodic_tol: f64,
    pub max_periods: usize,
    /// Bound on the finite-difference Riccati residual of returned paths.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            ode: OdeOptions::default(),
            sample_step: 0.01,
            periodic_tol: 1e-10,
            max_periods: 200,
            residual_tol: 1e-3,
        }
    }
}
