//! Differential Riccati equations and the affine offset equations.
//!
//! The backward matrix equation
//! `P' + A^T P + P A - P S P + C^T C = 0` with `S = B Q^{-1} B^T` is
//! integrated as a full matrix ODE (column-major flattening) and
//! symmetrized after every accepted step. The periodic solution is
//! obtained by sweeping backward over successive periods from `P = 0`
//! until two consecutive one-period restrictions agree; the same sweep
//! produces the periodic offset `r`, which solves
//! `r' = -(A - S P)^T r + C^T C y_d`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{monodromy, propagate_samples, MonodromyReport};
use crate::ode::{integrate, OdeSystem};
use crate::options::SolverOptions;
use crate::path::{spectral_norm, uniform_grid, MatrixPath, VectorPath};
use crate::problem::PeriodicLQProblem;

struct RiccatiSystem<'a> {
    problem: &'a PeriodicLQProblem,
    n: usize,
}

impl RiccatiSystem<'_> {
    fn unflatten(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.n, x.as_slice())
    }
}

impl OdeSystem for RiccatiSystem<'_> {
    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn rhs(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let p = self.unflatten(x);
        let dp = -riccati_operator(self.problem, t, &p);
        DVector::from_column_slice(dp.as_slice())
    }

    fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        // d/dP of -(A^T P + P A - P S P) is -(G^T ⊗ I + I ⊗ G^T) with G = A - S P
        let p = self.unflatten(x);
        let co = self.problem.coefficients(t);
        let g = &co.a - &co.s * &p;
        let id = DMatrix::identity(self.n, self.n);
        -(g.transpose().kronecker(&id) + id.kronecker(&g.transpose()))
    }

    fn project(&self, x: &mut DVector<f64>) {
        let n = self.n;
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (x[i + j * n] + x[j + i * n]);
                x[i + j * n] = avg;
                x[j + i * n] = avg;
            }
        }
    }
}

/// `A^T P + P A - P S P + C^T C` at time `t`.
pub fn riccati_operator(problem: &PeriodicLQProblem, t: f64, p: &DMatrix<f64>) -> DMatrix<f64> {
    let co = problem.coefficients(t);
    let atp = co.a.transpose() * p;
    &atp + atp.transpose() - p * &co.s * p + &co.ctc
}

fn integrate_riccati_backward(
    problem: &PeriodicLQProblem,
    terminal: &DMatrix<f64>,
    grid_desc: &[f64],
    opts: &SolverOptions,
) -> Result<MatrixPath> {
    let n = problem.state_dim();
    let sys = RiccatiSystem { problem, n };
    let x1 = DVector::from_column_slice(terminal.as_slice());
    let t_from = grid_desc[0];
    let t_to = *grid_desc.last().unwrap();
    let s = integrate(&sys, t_from, t_to, &x1, grid_desc, &opts.ode)?;
    if s.states.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Internal("Riccati solution is not finite".into()));
    }
    let mut grid = s.times;
    let mut values: Vec<DMatrix<f64>> = s.states.iter().map(|x| sys.unflatten(x)).collect();
    let mut slopes: Vec<DMatrix<f64>> = s.slopes.iter().map(|x| sys.unflatten(x)).collect();
    grid.reverse();
    values.reverse();
    slopes.reverse();
    MatrixPath::new(grid, values, slopes)
}

fn check_terminal(problem: &PeriodicLQProblem, p: &DMatrix<f64>) -> Result<()> {
    let n = problem.state_dim();
    if p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "terminal value is {:?}, expected {n}x{n}",
            p.shape()
        )));
    }
    if (p - p.transpose()).norm() > 1e-12 * (1.0 + p.norm()) {
        return Err(Error::InvalidProblem("terminal value must be symmetric".into()));
    }
    if p.clone().symmetric_eigenvalues().min() < -1e-10 {
        return Err(Error::InvalidProblem("terminal value must be positive semidefinite".into()));
    }
    Ok(())
}

/// `P^T` on `[0, horizon]` with `P(horizon) = terminal`.
pub fn solve_riccati_terminal(
    problem: &PeriodicLQProblem,
    horizon: f64,
    terminal: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<MatrixPath> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidProblem(format!("horizon must be positive, got {horizon}")));
    }
    check_terminal(problem, terminal)?;
    let mut grid = uniform_grid(0.0, horizon, opts.sample_step);
    grid.reverse();
    integrate_riccati_backward(problem, terminal, &grid, opts)
}

/// Result of the periodic sweep.
#[derive(Clone, Debug)]
pub struct PeriodicRiccati {
    /// `P_θ` on `[0, θ]`.
    pub path: MatrixPath,
    /// Number of backward period sweeps performed.
    pub sweeps: usize,
    /// Sup-norm distance between the last two period restrictions.
    pub gap: f64,
}

/// Periodic solution of the Riccati equation by backward period sweeps
/// from `P = 0`.
pub fn solve_periodic_riccati(problem: &PeriodicLQProblem, opts: &SolverOptions) -> Result<PeriodicRiccati> {
    if !(opts.periodic_tol > 0.0) || opts.max_periods < 2 {
        return Err(Error::InvalidProblem(
            "periodic sweep needs tol > 0 and max_periods >= 2".into(),
        ));
    }
    let theta = problem.period();
    let n = problem.state_dim();
    let mut grid = uniform_grid(0.0, theta, opts.sample_step);
    grid.reverse();
    let mut terminal = DMatrix::zeros(n, n);
    let mut previous: Option<MatrixPath> = None;
    let mut gap = f64::INFINITY;
    for sweep in 1..=opts.max_periods {
        let path = integrate_riccati_backward(problem, &terminal, &grid, opts).map_err(|e| match e {
            Error::Internal(_) => Error::NonStabilizable {
                periods: sweep,
                gap: f64::INFINITY,
                last_two: Box::new((terminal.clone(), terminal.clone())),
            },
            other => other,
        })?;
        if let Some(prev) = &previous {
            gap = sup_spectral_distance(prev, &path);
            if gap <= opts.periodic_tol {
                return Ok(PeriodicRiccati {
                    path,
                    sweeps: sweep,
                    gap,
                });
            }
        }
        terminal = path.first().clone();
        previous = Some(path);
    }
    let last = previous.expect("at least two sweeps");
    Err(Error::NonStabilizable {
        periods: opts.max_periods,
        gap,
        last_two: Box::new((last.values()[last.len() - 1].clone(), last.first().clone())),
    })
}

fn sup_spectral_distance(a: &MatrixPath, b: &MatrixPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| spectral_norm(&(x - y)))
        .fold(0.0, f64::max)
}

/// Closed-loop generator `A(t) - S(t) P(t)`; `period` evaluates `P` by
/// wraparound.
pub fn closed_loop_generator<'a>(
    problem: &'a PeriodicLQProblem,
    p: &'a MatrixPath,
    period: Option<f64>,
) -> impl Fn(f64) -> DMatrix<f64> + Sync + 'a {
    move |t| {
        let co = problem.coefficients(t);
        let pt = match period {
            Some(theta) => p.eval_periodic(t, theta),
            None => p.eval(t),
        };
        co.a - co.s * pt
    }
}

/// Period map of the closed loop `A - S P_θ`.
pub fn closed_loop_monodromy(
    problem: &PeriodicLQProblem,
    p_theta: &MatrixPath,
    opts: &SolverOptions,
) -> Result<MonodromyReport> {
    let gen = closed_loop_generator(problem, p_theta, Some(problem.period()));
    monodromy(&gen, problem.state_dim(), problem.period(), opts)
}

/// Backward solve of `r' = -(A - S P)^T r + C^T C y_d` over the (ascending)
/// `grid`, from `r(grid_end) = terminal`.
fn solve_r_backward(
    problem: &PeriodicLQProblem,
    p: &MatrixPath,
    period: Option<f64>,
    grid: &[f64],
    terminal: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<VectorPath> {
    let closed = closed_loop_generator(problem, p, period);
    let gen = move |t: f64| -closed(t).transpose();
    let forcing = |t: f64| {
        let co = problem.coefficients(t);
        &co.ctc * &co.y_d
    };
    let mut desc = grid.to_vec();
    desc.reverse();
    propagate_samples(&gen, Some(&forcing), desc[0], terminal, &desc, &opts.ode)
}

/// `r^T` on the grid of `p_finite` (which must cover `[0, horizon]`), with
/// `r^T(horizon) = 0`.
pub fn solve_r_terminal(
    problem: &PeriodicLQProblem,
    p_finite: &MatrixPath,
    horizon: f64,
    opts: &SolverOptions,
) -> Result<VectorPath> {
    let slack = 1e-9 * (1.0 + horizon);
    if p_finite.start() > slack || (p_finite.end() - horizon).abs() > slack {
        return Err(Error::GridMismatch(format!(
            "Riccati path covers [{}, {}], expected [0, {horizon}]",
            p_finite.start(),
            p_finite.end()
        )));
    }
    let zero = DVector::zeros(problem.state_dim());
    solve_r_backward(problem, p_finite, None, p_finite.grid(), &zero, opts)
}

/// Result of the periodic offset sweep.
#[derive(Clone, Debug)]
pub struct PeriodicOffset {
    pub path: VectorPath,
    pub sweeps: usize,
    pub gap: f64,
    pub closed_loop: MonodromyReport,
}

/// Periodic offset `r_θ` by backward period sweeps.
pub fn solve_periodic_r(
    problem: &PeriodicLQProblem,
    p_theta: &MatrixPath,
    opts: &SolverOptions,
) -> Result<PeriodicOffset> {
    let closed_loop = closed_loop_monodromy(problem, p_theta, opts)?;
    if !closed_loop.is_stable() {
        return Err(Error::StabilityViolation {
            spectral_radius: closed_loop.spectral_radius,
        });
    }
    let theta = problem.period();
    let grid = p_theta.grid().to_vec();
    let mut terminal = DVector::zeros(problem.state_dim());
    let mut previous: Option<VectorPath> = None;
    for sweep in 1..=opts.max_periods {
        let path = solve_r_backward(problem, p_theta, Some(theta), &grid, &terminal, opts)?;
        if let Some(prev) = &previous {
            let gap = prev.sup_distance(&path)?;
            if gap <= opts.periodic_tol {
                return Ok(PeriodicOffset {
                    path,
                    sweeps: sweep,
                    gap,
                    closed_loop,
                });
            }
        }
        terminal = path.first().clone();
        previous = Some(path);
    }
    Err(Error::StabilityViolation {
        spectral_radius: closed_loop.spectral_radius,
    })
}

/// Largest Frobenius norm of the Riccati defect over interior grid points,
/// with `P'` from three-point differences.
pub fn riccati_residual(problem: &PeriodicLQProblem, p: &MatrixPath) -> f64 {
    let g = p.grid();
    let v = p.values();
    (1..g.len().saturating_sub(1))
        .map(|k| {
            let (h0, h1) = (g[k] - g[k - 1], g[k + 1] - g[k]);
            let dp = (&v[k + 1] * (h0 / (h1 * (h0 + h1))) - &v[k - 1] * (h1 / (h0 * (h0 + h1))))
                + &v[k] * ((h1 - h0) / (h0 * h1));
            (dp + riccati_operator(problem, g[k], &v[k])).norm()
        })
        .fold(0.0, f64::max)
}

/// Horizon-independent summary of a periodic Riccati solve.
#[derive(Clone, Debug, Serialize)]
pub struct RiccatiSummary {
    pub sweeps: usize,
    pub gap: f64,
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub max_symmetry_defect: f64,
}

impl RiccatiSummary {
    pub fn new(problem: &PeriodicLQProblem, solved: &PeriodicRiccati) -> Self {
        RiccatiSummary {
            sweeps: solved.sweeps,
            gap: solved.gap,
            residual: riccati_residual(problem, &solved.path),
            min_eigenvalue: solved.path.min_eigenvalue(),
            max_symmetry_defect: solved.path.max_symmetry_defect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn constant(y_d: f64) -> PeriodicLQProblem {
        PeriodicLQProblem::constant(
            scalar(-1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            DVector::from_element(1, y_d),
            1.0,
        )
        .unwrap()
    }

    fn scalar_example() -> PeriodicLQProblem {
        PeriodicLQProblem::builder(1, 1, 2.0 * PI)
            .q_floor(1.0)
            .a(|t| scalar(t.sin()))
            .b(|_| scalar(1.0))
            .c(|t| scalar((4.0 - t.sin().powi(2) - t.cos()).sqrt()))
            .q(|_| scalar(1.0))
            .y_d(|t| DVector::from_element(1, t.cos()))
            .build()
            .unwrap()
    }

    #[test]
    fn zero_cost_weight_keeps_zero() {
        let p = PeriodicLQProblem::constant(
            scalar(0.3),
            scalar(1.0),
            scalar(0.0),
            scalar(1.0),
            DVector::zeros(1),
            1.0,
        )
        .unwrap();
        let path = solve_riccati_terminal(&p, 3.0, &scalar(0.0), &SolverOptions::default()).unwrap();
        assert!(path.sup_norm() == 0.0);
        assert_eq!(riccati_residual(&p, &path), 0.0);
    }

    #[test]
    fn constant_problem_converges_to_algebraic_root() {
        let path = solve_riccati_terminal(&constant(0.0), 30.0, &scalar(0.0), &SolverOptions::default())
            .unwrap();
        assert!((path.first()[(0, 0)] - (SQRT_2 - 1.0)).abs() < 1e-8);
        assert_eq!(path.last()[(0, 0)], 0.0);
        let periodic = solve_periodic_riccati(&constant(0.0), &SolverOptions::default()).unwrap();
        assert!(periodic
            .path
            .values()
            .iter()
            .all(|p| (p[(0, 0)] - (SQRT_2 - 1.0)).abs() < 1e-9));
    }

    #[test]
    fn scalar_example_periodic_solution() {
        // P(t) = 2 + sin t solves the periodic equation exactly
        let solved = solve_periodic_riccati(&scalar_example(), &SolverOptions::default()).unwrap();
        let worst = solved
            .path
            .grid()
            .iter()
            .zip(solved.path.values())
            .map(|(t, p)| (p[(0, 0)] - (2.0 + t.sin())).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        assert!(solved.gap <= 1e-10);
        assert!((solved.path.first() - solved.path.last()).norm() <= 1e-10);
    }

    #[test]
    fn residual_of_exact_and_wrong_solutions() {
        let p = scalar_example();
        let grid = uniform_grid(0.0, 2.0 * PI, 0.01);
        let exact = MatrixPath::from_samples(
            grid.clone(),
            grid.iter().map(|t| scalar(2.0 + t.sin())).collect(),
        )
        .unwrap();
        // differencing floor h^2/6 |P'''|
        assert!(riccati_residual(&p, &exact) < 2e-5);
        let wrong = MatrixPath::from_samples(grid.clone(), vec![scalar(2.0); grid.len()]).unwrap();
        assert!(riccati_residual(&p, &wrong) >= 0.5);
    }

    #[test]
    fn unstabilizable_pair_is_reported() {
        let p = PeriodicLQProblem::constant(
            scalar(0.0),
            scalar(0.0),
            scalar(1.0),
            scalar(1.0),
            DVector::zeros(1),
            1.0,
        )
        .unwrap();
        let opts = SolverOptions {
            max_periods: 20,
            ..Default::default()
        };
        match solve_periodic_riccati(&p, &opts) {
            Err(Error::NonStabilizable { gap, last_two, .. }) => {
                assert!((gap - 1.0).abs() < 1e-9);
                assert!((last_two.1[(0, 0)] - last_two.0[(0, 0)] - 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offset_with_zero_target_vanishes() {
        let opts = SolverOptions::default();
        let p = constant(0.0);
        let pt = solve_riccati_terminal(&p, 5.0, &scalar(0.0), &opts).unwrap();
        let r = solve_r_terminal(&p, &pt, 5.0, &opts).unwrap();
        assert_eq!(r.sup_norm(), 0.0);
        let per = solve_periodic_riccati(&p, &opts).unwrap();
        let rp = solve_periodic_r(&p, &per.path, &opts).unwrap();
        assert_eq!(rp.path.sup_norm(), 0.0);
    }

    #[test]
    fn constant_periodic_offset() {
        // r = -∫_t^∞ e^{-√2(τ - t)} dτ = -1/√2
        let opts = SolverOptions::default();
        let p = constant(1.0);
        let per = solve_periodic_riccati(&p, &opts).unwrap();
        let r = solve_periodic_r(&p, &per.path, &opts).unwrap();
        assert!(r.path.values().iter().all(|v| (v[0] + 1.0 / SQRT_2).abs() < 1e-8));
        assert!((r.closed_loop.decay_rate - SQRT_2).abs() < 1e-7);
        // finite horizon offset approaches the periodic one away from T
        let pt = solve_riccati_terminal(&p, 30.0, &scalar(0.0), &opts).unwrap();
        let rt = solve_r_terminal(&p, &pt, 30.0, &opts).unwrap();
        assert!((rt.first()[0] + 1.0 / SQRT_2).abs() < 1e-8);
        assert_eq!(rt.last()[0], 0.0);
    }

    #[test]
    fn rejects_bad_terminal_data() {
        let p = constant(0.0);
        let opts = SolverOptions::default();
        assert!(solve_riccati_terminal(&p, 1.0, &scalar(-1.0), &opts).is_err());
        assert!(solve_riccati_terminal(&p, 0.0, &scalar(0.0), &opts).is_err());
        assert!(solve_riccati_terminal(&p, 1.0, &DMatrix::zeros(2, 2), &opts).is_err());
    }
}
