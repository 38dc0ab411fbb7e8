//! Periodic linear-quadratic tracking over long horizons.
//!
//! The crate solves finite-horizon and periodic Riccati equations, builds
//! optimal state/control/adjoint triples for periodic LQ tracking problems,
//! and measures how closely long-horizon optima follow the periodic optimum
//! in the middle of the horizon.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolution;
pub mod io;
pub mod ode;
pub mod options;
pub mod path;
pub mod problem;
pub mod riccati;
pub mod scenarios;
pub mod shooting;
pub mod turnpike;

pub use error::{Error, Result};
pub use options::SolverOptions;
pub use path::{MatrixPath, Path, VectorPath};
pub use problem::PeriodicLQProblem;
