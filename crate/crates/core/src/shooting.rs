//! Riccati-free reference solutions by multiple shooting.
//!
//! The optimality system is integrated as one linear ODE in `z = (y, λ)`:
//!
//! ```text
//! y' =  A y - S λ
//! λ' = -C^T C y - A^T λ + C^T C y_d
//! ```
//!
//! The horizon is split into equal segments; the unknowns are the segment
//! start values, and the residual collects continuity defects plus the
//! boundary conditions. A damped Newton iteration with finite-difference
//! segment Jacobians drives the residual to zero.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions, OdeSystem};
use crate::path::{uniform_grid, VectorPath};
use crate::problem::{evaluate_cost, PeriodicLQProblem};
use crate::turnpike::{Horizon, OptimalTriple};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    pub max_iterations: usize,
    /// Max-norm of the shooting residual that counts as converged.
    pub newton_tolerance: f64,
    pub segments: usize,
    /// Relative perturbation for the finite-difference Jacobian.
    pub finite_difference_step: f64,
    pub ode: OdeOptions,
    /// Output grid spacing of the returned triple.
    pub sample_step: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            max_iterations: 30,
            newton_tolerance: 1e-9,
            segments: 10,
            finite_difference_step: 1e-6,
            ode: OdeOptions {
                rtol: 1e-11,
                atol: 1e-13,
                ..OdeOptions::default()
            },
            sample_step: 0.01,
        }
    }
}

impl ShootingConfig {
    fn check(&self) -> Result<()> {
        if self.segments < 1
            || self.max_iterations < 1
            || !(self.newton_tolerance > 0.0)
            || !(self.finite_difference_step > 0.0)
            || !(self.sample_step > 0.0)
        {
            return Err(Error::InvalidProblem(format!("invalid shooting configuration {self:?}")));
        }
        Ok(())
    }
}

/// Converged shooting solution with its Newton history.
#[derive(Clone, Debug)]
pub struct ShootingOutcome {
    pub triple: OptimalTriple,
    pub iterations: usize,
    /// Residual max-norm before each Newton step, ending with the accepted one.
    pub residual_history: Vec<f64>,
}

struct Hamiltonian<'a> {
    problem: &'a PeriodicLQProblem,
    n: usize,
}

impl OdeSystem for Hamiltonian<'_> {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, t: f64, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let co = self.problem.coefficients(t);
        let y = z.rows(0, n);
        let l = z.rows(n, n);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&(&co.a * y - &co.s * l));
        out.rows_mut(n, n)
            .copy_from(&(&co.ctc * (&co.y_d - y) - co.a.transpose() * l));
        out
    }

    fn jacobian(&self, t: f64, _z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let co = self.problem.coefficients(t);
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&co.a);
        j.view_mut((0, n), (n, n)).copy_from(&(-&co.s));
        j.view_mut((n, 0), (n, n)).copy_from(&(-&co.ctc));
        j.view_mut((n, n), (n, n)).copy_from(&(-co.a.transpose()));
        j
    }
}

/// Unknowns and residual layout for one shooting problem.
struct Shooter<'a> {
    sys: Hamiltonian<'a>,
    nodes: Vec<f64>,
    config: ShootingConfig,
    /// `Some(y0)` for the initial/terminal problem, `None` for the periodic one.
    y0: Option<DVector<f64>>,
}

impl Shooter<'_> {
    fn n(&self) -> usize {
        self.sys.n
    }

    fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    fn unknowns(&self) -> usize {
        let (n, m) = (self.n(), self.segments());
        match self.y0 {
            Some(_) => n + 2 * n * (m - 1),
            None => 2 * n * m,
        }
    }

    /// Segment start values from the unknown vector.
    fn starts(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let n = self.n();
        match &self.y0 {
            Some(y0) => {
                let mut z0 = DVector::zeros(2 * n);
                z0.rows_mut(0, n).copy_from(y0);
                z0.rows_mut(n, n).copy_from(&x.rows(0, n));
                let mut out = vec![z0];
                out.extend((1..self.segments()).map(|k| x.rows(n + 2 * n * (k - 1), 2 * n).into_owned()));
                out
            }
            None => (0..self.segments()).map(|k| x.rows(2 * n * k, 2 * n).into_owned()).collect(),
        }
    }

    fn flow(&self, k: usize, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let s = integrate(&self.sys, a, b, z, &[b], &self.config.ode)?;
        Ok(s.states.into_iter().next().expect("one output"))
    }

    fn residual_from_ends(&self, starts: &[DVector<f64>], ends: &[DVector<f64>]) -> DVector<f64> {
        let (n, m) = (self.n(), self.segments());
        let mut r = DVector::zeros(self.unknowns());
        match self.y0 {
            Some(_) => {
                for k in 0..m - 1 {
                    r.rows_mut(2 * n * k, 2 * n).copy_from(&(&ends[k] - &starts[k + 1]));
                }
                r.rows_mut(2 * n * (m - 1), n).copy_from(&ends[m - 1].rows(n, n));
            }
            None => {
                for k in 0..m {
                    r.rows_mut(2 * n * k, 2 * n)
                        .copy_from(&(&ends[k] - &starts[(k + 1) % m]));
                }
            }
        }
        r
    }

    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let starts = self.starts(x);
        let ends = (0..self.segments())
            .into_par_iter()
            .map(|k| self.flow(k, &starts[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.residual_from_ends(&starts, &ends))
    }

    /// Dense Jacobian of the residual from finite-difference segment maps.
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (n, m) = (self.n(), self.segments());
        let starts = self.starts(x);
        let h = self.config.finite_difference_step;
        let blocks = (0..m)
            .into_par_iter()
            .map(|k| {
                let base = self.flow(k, &starts[k])?;
                let mut block = DMatrix::zeros(2 * n, 2 * n);
                for j in 0..2 * n {
                    let step = h * (1.0 + starts[k][j].abs());
                    let mut z = starts[k].clone();
                    z[j] += step;
                    block.set_column(j, &((self.flow(k, &z)? - &base) / step));
                }
                Ok(block)
            })
            .collect::<Result<Vec<DMatrix<f64>>>>()?;
        let mut jac = DMatrix::zeros(self.unknowns(), self.unknowns());
        let id = DMatrix::<f64>::identity(2 * n, 2 * n);
        match self.y0 {
            Some(_) => {
                // column offset of segment k's start value; segment 0 only has λ
                let col = |k: usize| if k == 0 { 0 } else { n + 2 * n * (k - 1) };
                for (k, block) in blocks.iter().enumerate() {
                    let (rows, row0) = if k + 1 < m { (2 * n, 2 * n * k) } else { (n, 2 * n * k) };
                    let skip = if k + 1 < m { 0 } else { n };
                    let phi = block.view((skip, 0), (rows, 2 * n));
                    if k == 0 {
                        jac.view_mut((row0, 0), (rows, n)).copy_from(&phi.columns(n, n));
                    } else {
                        jac.view_mut((row0, col(k)), (rows, 2 * n)).copy_from(&phi);
                    }
                    if k + 1 < m {
                        let c = col(k + 1);
                        let mut v = jac.view_mut((row0, c), (2 * n, 2 * n));
                        v -= &id;
                    }
                }
            }
            None => {
                for (k, block) in blocks.iter().enumerate() {
                    jac.view_mut((2 * n * k, 2 * n * k), (2 * n, 2 * n)).copy_from(block);
                    let c = 2 * n * ((k + 1) % m);
                    let mut v = jac.view_mut((2 * n * k, c), (2 * n, 2 * n));
                    v -= &id;
                }
            }
        }
        Ok(jac)
    }

    fn newton(&self, mut x: DVector<f64>) -> Result<(DVector<f64>, usize, Vec<f64>)> {
        let mut r = self.residual(&x)?;
        let mut history = vec![r.amax()];
        for iteration in 1..=self.config.max_iterations {
            let size = r.amax();
            if size <= self.config.newton_tolerance {
                return Ok((x, iteration, history));
            }
            let jac = self.jacobian(&x)?;
            if self.y0.is_none() {
                let sv = jac.clone().singular_values();
                let (lo, hi) = (sv.min(), sv.max());
                if !(lo > 1e-12 * hi) {
                    return Err(Error::DegeneratePeriodicity { min_singular: lo });
                }
            }
            let step = jac.lu().solve(&(-&r)).ok_or(Error::OracleFailure {
                iterations: iteration,
                defect: size,
            })?;
            let mut alpha = 1.0;
            loop {
                let trial = &x + &step * alpha;
                let r_trial = self.residual(&trial)?;
                if r_trial.amax() < size {
                    x = trial;
                    r = r_trial;
                    history.push(r.amax());
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-4 {
                    return Err(Error::OracleFailure {
                        iterations: iteration,
                        defect: size,
                    });
                }
            }
        }
        let defect = r.amax();
        if defect <= self.config.newton_tolerance {
            return Ok((x, self.config.max_iterations, history));
        }
        Err(Error::OracleFailure {
            iterations: self.config.max_iterations,
            defect,
        })
    }

    /// Samples the converged solution on a uniform grid.
    fn triple(&self, x: &DVector<f64>, horizon: Horizon) -> Result<OptimalTriple> {
        let n = self.n();
        let problem = self.sys.problem;
        let end = *self.nodes.last().unwrap();
        let grid = uniform_grid(self.nodes[0], end, self.config.sample_step);
        let starts = self.starts(x);
        let m = self.segments();
        let pieces = (0..m)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (self.nodes[k], self.nodes[k + 1]);
                let outputs: Vec<f64> = grid
                    .iter()
                    .copied()
                    .filter(|&t| t >= a && (t < b || (k + 1 == m && t <= b)))
                    .collect();
                if outputs.is_empty() {
                    return Ok((Vec::new(), Vec::new()));
                }
                let last = *outputs.last().unwrap();
                let s = integrate(&self.sys, a, last, &starts[k], &outputs, &self.config.ode)?;
                Ok((s.states, s.slopes))
            })
            .collect::<Result<Vec<_>>>()?;
        let (mut states, mut slopes) = (Vec::new(), Vec::new());
        for (st, sl) in pieces {
            states.extend(st);
            slopes.extend(sl);
        }
        let part = |v: &[DVector<f64>], off: usize| -> Vec<DVector<f64>> {
            v.iter().map(|z| z.rows(off, n).into_owned()).collect()
        };
        let y = VectorPath::new(grid.clone(), part(&states, 0), part(&slopes, 0))?;
        let lambda = VectorPath::new(grid.clone(), part(&states, n), part(&slopes, n))?;
        let (mut u, mut u_dot) = (Vec::new(), Vec::new());
        for (k, &t) in grid.iter().enumerate() {
            let g = problem.gain(t);
            u.push(-(&g * &lambda.values()[k]));
            u_dot.push(-(problem.gain_derivative(t) * &lambda.values()[k]) - &g * &lambda.slopes()[k]);
        }
        let u = VectorPath::new(grid, u, u_dot)?;
        let cost = evaluate_cost(problem, &y, &u, self.nodes[0], end)?;
        Ok(OptimalTriple {
            y,
            u,
            lambda,
            cost,
            horizon,
        })
    }
}

fn nodes(horizon: f64, segments: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..segments).map(|k| horizon * k as f64 / segments as f64).collect();
    v.push(horizon);
    v
}

/// Solves the optimality system with `y(0) = y0`, `λ(T) = 0`, optionally
/// starting Newton from a known triple on `[0, T]`.
pub fn solve_extremal_bvp_from(
    problem: &PeriodicLQProblem,
    y0: &DVector<f64>,
    horizon: f64,
    config: &ShootingConfig,
    guess: Option<&OptimalTriple>,
) -> Result<ShootingOutcome> {
    config.check()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidProblem(format!("horizon must be positive, got {horizon}")));
    }
    let n = problem.state_dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state has length {}, expected {n}", y0.len())));
    }
    let shooter = Shooter {
        sys: Hamiltonian { problem, n },
        nodes: nodes(horizon, config.segments),
        config: *config,
        y0: Some(y0.clone()),
    };
    let mut x = DVector::zeros(shooter.unknowns());
    if let Some(g) = guess {
        x.rows_mut(0, n).copy_from(&g.lambda.eval(0.0));
        for k in 1..shooter.segments() {
            let t = shooter.nodes[k];
            let off = n + 2 * n * (k - 1);
            x.rows_mut(off, n).copy_from(&g.y.eval(t));
            x.rows_mut(off + n, n).copy_from(&g.lambda.eval(t));
        }
    }
    let (x, iterations, residual_history) = shooter.newton(x)?;
    let triple = shooter.triple(&x, Horizon::Finite(horizon))?;
    Ok(ShootingOutcome {
        triple,
        iterations,
        residual_history,
    })
}

/// Solves the optimality system with `y(0) = y0`, `λ(T) = 0` from a zero
/// initial guess.
pub fn solve_extremal_bvp(
    problem: &PeriodicLQProblem,
    y0: &DVector<f64>,
    horizon: f64,
    config: &ShootingConfig,
) -> Result<ShootingOutcome> {
    solve_extremal_bvp_from(problem, y0, horizon, config, None)
}

/// Solves the optimality system with `z(0) = z(θ)`.
pub fn solve_periodic_bvp(problem: &PeriodicLQProblem, config: &ShootingConfig) -> Result<ShootingOutcome> {
    config.check()?;
    let n = problem.state_dim();
    let theta = problem.period();
    let shooter = Shooter {
        sys: Hamiltonian { problem, n },
        nodes: nodes(theta, config.segments),
        config: *config,
        y0: None,
    };
    let (x, iterations, residual_history) = shooter.newton(DVector::zeros(shooter.unknowns()))?;
    let triple = shooter.triple(&x, Horizon::Periodic(theta))?;
    Ok(ShootingOutcome {
        triple,
        iterations,
        residual_history,
    })
}
