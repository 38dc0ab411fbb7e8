//! Time-varying linear systems `x' = F(t) x + g(t)`: propagation, period
//! maps and Floquet stability.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions, OdeSystem};
use crate::options::SolverOptions;
use crate::path::{uniform_grid, VectorPath};

/// `|mu - 1|` below which 1 counts as a Floquet multiplier.
pub const RESOLVENT_TOL: f64 = 1e-8;

pub type Generator<'a> = &'a (dyn Fn(f64) -> DMatrix<f64> + Sync);
pub type Forcing<'a> = &'a (dyn Fn(f64) -> DVector<f64> + Sync);

pub(crate) struct LinearSystem<'a> {
    pub generator: Generator<'a>,
    pub forcing: Option<Forcing<'a>>,
    pub dim: usize,
}

impl OdeSystem for LinearSystem<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let mut dx = (self.generator)(t) * x;
        if let Some(g) = self.forcing {
            dx += g(t);
        }
        dx
    }

    fn jacobian(&self, t: f64, _x: &DVector<f64>) -> DMatrix<f64> {
        (self.generator)(t)
    }
}

/// Solves `x' = F(t) x + g(t)` from `(t_from, x_from)` and samples at
/// `outputs` (which may run backward in time).
pub(crate) fn propagate_samples(
    generator: Generator<'_>,
    forcing: Option<Forcing<'_>>,
    t_from: f64,
    x_from: &DVector<f64>,
    outputs: &[f64],
    ode: &OdeOptions,
) -> Result<VectorPath> {
    let sys = LinearSystem {
        generator,
        forcing,
        dim: x_from.len(),
    };
    let t_to = *outputs.last().unwrap_or(&t_from);
    let s = integrate(&sys, t_from, t_to, x_from, outputs, ode)?;
    samples_to_path(s.times, s.states, s.slopes)
}

/// Builds an increasing-grid path from samples in either time direction.
pub(crate) fn samples_to_path(
    mut times: Vec<f64>,
    mut states: Vec<DVector<f64>>,
    mut slopes: Vec<DVector<f64>>,
) -> Result<VectorPath> {
    if times.len() > 1 && times[0] > times[1] {
        times.reverse();
        states.reverse();
        slopes.reverse();
    }
    VectorPath::new(times, states, slopes)
}

/// Solution of `x' = F(t) x + g(t)`, `x(t0) = x0` on `[t0, t1]`, sampled on
/// the uniform output grid of `opts`.
pub fn propagate(
    generator: Generator<'_>,
    forcing: Option<Forcing<'_>>,
    t0: f64,
    t1: f64,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<VectorPath> {
    if t1 < t0 {
        return Err(Error::InvalidProblem(format!("propagate needs t0 <= t1, got [{t0}, {t1}]")));
    }
    let grid = uniform_grid(t0, t1, opts.sample_step);
    propagate_samples(generator, forcing, t0, x0, &grid, &opts.ode)
}

/// Backward counterpart of [`propagate`]: terminal value at `t1`.
pub fn propagate_backward(
    generator: Generator<'_>,
    forcing: Option<Forcing<'_>>,
    t0: f64,
    t1: f64,
    x1: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<VectorPath> {
    if t1 < t0 {
        return Err(Error::InvalidProblem(format!("propagate_backward needs t0 <= t1, got [{t0}, {t1}]")));
    }
    let mut grid = uniform_grid(t0, t1, opts.sample_step);
    grid.reverse();
    propagate_samples(generator, forcing, t1, x1, &grid, &opts.ode)
}

/// Transition matrix `U(t1, t0)` by column-wise propagation of the identity.
pub fn transition_matrix(
    generator: Generator<'_>,
    dim: usize,
    t0: f64,
    t1: f64,
    ode: &OdeOptions,
) -> Result<DMatrix<f64>> {
    let columns: Vec<Result<DVector<f64>>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut e = DVector::zeros(dim);
            e[j] = 1.0;
            let sys = LinearSystem {
                generator,
                forcing: None,
                dim,
            };
            let s = integrate(&sys, t0, t1, &e, &[t1], ode)?;
            Ok(s.states.into_iter().next().unwrap())
        })
        .collect();
    let mut m = DMatrix::zeros(dim, dim);
    for (j, col) in columns.into_iter().enumerate() {
        m.set_column(j, &col?);
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyReport {
    pub period: f64,
    #[serde(serialize_with = "crate::io::serialize_matrix")]
    pub period_map: DMatrix<f64>,
    pub spectral_radius: f64,
    /// `-ln(spectral_radius) / period`; positive iff exponentially stable.
    pub decay_rate: f64,
    /// Whether 1 is not a Floquet multiplier (within [`RESOLVENT_TOL`]).
    pub one_in_resolvent: bool,
    /// Floquet multipliers as `(re, im)` pairs.
    pub multipliers: Vec<(f64, f64)>,
}

impl MonodromyReport {
    pub fn from_period_map(period_map: DMatrix<f64>, period: f64) -> Self {
        let eig = period_map.complex_eigenvalues();
        let spectral_radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let nearest_one = eig
            .iter()
            .map(|z| (z - nalgebra::Complex::new(1.0, 0.0)).norm())
            .fold(f64::INFINITY, f64::min);
        MonodromyReport {
            period,
            spectral_radius,
            decay_rate: -spectral_radius.ln() / period,
            one_in_resolvent: nearest_one > RESOLVENT_TOL,
            multipliers: eig.iter().map(|z| (z.re, z.im)).collect(),
            period_map,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }

    /// Distance from 1 to the nearest multiplier.
    pub fn resolvent_distance(&self) -> f64 {
        self.multipliers
            .iter()
            .map(|&(re, im)| ((re - 1.0).powi(2) + im * im).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Period map `U(period, 0)` of the generator and its Floquet data.
pub fn monodromy(
    generator: Generator<'_>,
    dim: usize,
    period: f64,
    opts: &SolverOptions,
) -> Result<MonodromyReport> {
    monodromy_from(generator, dim, 0.0, period, opts)
}

/// Period map `U(t0 + period, t0)`.
pub fn monodromy_from(
    generator: Generator<'_>,
    dim: usize,
    t0: f64,
    period: f64,
    opts: &SolverOptions,
) -> Result<MonodromyReport> {
    if !(period > 0.0) {
        return Err(Error::InvalidProblem(format!("period must be positive, got {period}")));
    }
    let m = transition_matrix(generator, dim, t0, t0 + period, &opts.ode)?;
    Ok(MonodromyReport::from_period_map(m, period))
}

/// The unique `period`-periodic solution of `x' = F(t) x + g(t)` on
/// `[0, period]`, through `x(0) = (I - U(θ,0))^{-1} ∫_0^θ U(θ,s) g(s) ds`.
pub fn periodic_solution_linear(
    generator: Generator<'_>,
    forcing: Forcing<'_>,
    dim: usize,
    period: f64,
    opts: &SolverOptions,
) -> Result<VectorPath> {
    let report = monodromy(generator, dim, period, opts)?;
    if !report.one_in_resolvent {
        return Err(Error::ResolventViolation {
            distance: report.resolvent_distance(),
        });
    }
    let zero = DVector::zeros(dim);
    let sys = LinearSystem {
        generator,
        forcing: Some(forcing),
        dim,
    };
    let particular = integrate(&sys, 0.0, period, &zero, &[period], &opts.ode)?;
    let lhs = DMatrix::identity(dim, dim) - &report.period_map;
    let x0 = lhs
        .lu()
        .solve(&particular.states[0])
        .ok_or(Error::ResolventViolation { distance: 0.0 })?;
    propagate(generator, Some(forcing), 0.0, period, &x0, opts)
}
