//! Optimal triples, their deviation from the periodic optimum, and the
//! exponential envelope fits.
//!
//! The finite-horizon triple is synthesized from `P^T` and `r^T`:
//! `y' = (A - S P) y - S r`, `λ = P y + r`, `u = -Q^{-1} B^T λ`. The periodic
//! triple uses the same formulas with `P_θ`, `r_θ`, and starts from the
//! unique periodic state of the closed loop.
//!
//! Besides the direct deviation `e(t)` (a difference of two solutions, so it
//! bottoms out at the integrator's accuracy), [`layer_deviation`] computes
//! the same quantity from the two linear equations that drive it. Writing
//! `δ = y^T - y_θ` and `z = P_θ y^T + r_θ - λ^T`,
//!
//! ```text
//! z' = -F_θ^T z,           z(T) = P_θ(T) y^T(T) + r_θ(T)
//! δ' =  F_θ δ + S z,       δ(0) = y0 - y_θ(0)
//! λ^T - λ_θ = P_θ δ - z
//! ```
//!
//! with `F_θ = A - S P_θ`. Both pieces are integrated with relative error
//! control only, which resolves `e(t)` far below the direct difference.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{periodic_solution_linear, propagate_samples, MonodromyReport};
use crate::options::SolverOptions;
use crate::path::{same_grid, spectral_norm, uniform_grid, MatrixPath, VectorPath};
use crate::problem::{evaluate_cost, trapezoid_on_grid, PeriodicLQProblem};
use crate::riccati::{
    closed_loop_generator, solve_periodic_r, solve_periodic_riccati, solve_r_terminal,
    solve_riccati_terminal, PeriodicOffset, PeriodicRiccati,
};

/// Floor below which deviations are treated as numerical noise by default.
pub const DEFAULT_ENVELOPE_FLOOR: f64 = 1e-12;
/// Default floor for the Riccati gap fit.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "length")]
pub enum Horizon {
    Finite(f64),
    Periodic(f64),
}

impl Horizon {
    pub fn length(&self) -> f64 {
        match *self {
            Horizon::Finite(t) | Horizon::Periodic(t) => t,
        }
    }
}

/// State, control and adjoint on a common grid.
#[derive(Clone, Debug)]
pub struct OptimalTriple {
    pub y: VectorPath,
    pub u: VectorPath,
    pub lambda: VectorPath,
    pub cost: f64,
    pub horizon: Horizon,
}

impl OptimalTriple {
    pub fn grid(&self) -> &[f64] {
        self.y.grid()
    }

    /// Largest of `|x(end) - x(start)|` over `y`, `u`, `λ`.
    pub fn periodicity_defect(&self) -> f64 {
        [&self.y, &self.u, &self.lambda]
            .iter()
            .map(|p| (p.last() - p.first()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|u + Q^{-1} B^T λ|` over the grid.
    pub fn control_defect(&self, problem: &PeriodicLQProblem) -> f64 {
        self.grid()
            .iter()
            .enumerate()
            .map(|(k, &t)| (&self.u.values()[k] + problem.gain(t) * &self.lambda.values()[k]).norm())
            .fold(0.0, f64::max)
    }

    /// Sup-norm distances `(y, u, λ)` to another triple on the same grid.
    pub fn distance(&self, other: &OptimalTriple) -> Result<(f64, f64, f64)> {
        Ok((
            self.y.sup_distance(&other.y)?,
            self.u.sup_distance(&other.u)?,
            self.lambda.sup_distance(&other.lambda)?,
        ))
    }

    /// Resamples every path onto `grid` (periodically when `period` is given).
    pub fn evaluate_at(&self, grid: &[f64], period: Option<f64>) -> Result<OptimalTriple> {
        Ok(OptimalTriple {
            y: self.y.resample(grid, period)?,
            u: self.u.resample(grid, period)?,
            lambda: self.lambda.resample(grid, period)?,
            cost: self.cost,
            horizon: self.horizon,
        })
    }
}

/// Finite-horizon solution together with the paths that synthesize it.
#[derive(Clone, Debug)]
pub struct FiniteHorizon {
    pub triple: OptimalTriple,
    pub p: MatrixPath,
    pub r: VectorPath,
    pub y0: DVector<f64>,
}

/// Periodic solution together with `P_θ`, `r_θ` and the closed-loop data.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub triple: OptimalTriple,
    pub riccati: PeriodicRiccati,
    pub offset: PeriodicOffset,
}

impl PeriodicOrbit {
    pub fn period(&self) -> f64 {
        self.triple.horizon.length()
    }

    pub fn p(&self) -> &MatrixPath {
        &self.riccati.path
    }

    pub fn r(&self) -> &VectorPath {
        &self.offset.path
    }

    pub fn closed_loop(&self) -> &MonodromyReport {
        &self.offset.closed_loop
    }
}

fn check_state(problem: &PeriodicLQProblem, y0: &DVector<f64>) -> Result<()> {
    if y0.len() != problem.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            y0.len(),
            problem.state_dim()
        )));
    }
    Ok(())
}

/// Adjoint and control on the grid of `y` from `λ = P y + r`, with slopes
/// taken from the adjoint equation.
fn complete_triple(
    problem: &PeriodicLQProblem,
    y: VectorPath,
    p: &MatrixPath,
    r: &VectorPath,
    horizon: Horizon,
) -> Result<OptimalTriple> {
    same_grid(y.grid(), p.grid())?;
    same_grid(y.grid(), r.grid())?;
    let n = y.len();
    let mut lam = Vec::with_capacity(n);
    let mut lam_dot = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut u_dot = Vec::with_capacity(n);
    for (k, &t) in y.grid().iter().enumerate() {
        let co = problem.coefficients(t);
        let yk = &y.values()[k];
        let l = &p.values()[k] * yk + &r.values()[k];
        let ld = &co.ctc * (&co.y_d - yk) - co.a.transpose() * &l;
        u_dot.push(-(problem.gain_derivative(t) * &l) - &co.gain * &ld);
        u.push(-(&co.gain * &l));
        lam.push(l);
        lam_dot.push(ld);
    }
    let grid = y.grid().to_vec();
    let lambda = VectorPath::new(grid.clone(), lam, lam_dot)?;
    let u = VectorPath::new(grid, u, u_dot)?;
    let (t0, t1) = (y.start(), y.end());
    let cost = evaluate_cost(problem, &y, &u, t0, t1)?;
    Ok(OptimalTriple {
        y,
        u,
        lambda,
        cost,
        horizon,
    })
}

/// Finite-horizon triple from precomputed `P^T`, `r^T` on `[0, T]`.
pub fn synthesize_finite(
    problem: &PeriodicLQProblem,
    p: &MatrixPath,
    r: &VectorPath,
    y0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<OptimalTriple> {
    check_state(problem, y0)?;
    same_grid(p.grid(), r.grid())?;
    let closed = closed_loop_generator(problem, p, None);
    let forcing = |t: f64| -(problem.coefficients(t).s * r.eval(t));
    let y = propagate_samples(&closed, Some(&forcing), p.start(), y0, p.grid(), &opts.ode)?;
    complete_triple(problem, y, p, r, Horizon::Finite(p.end() - p.start()))
}

/// Optimal triple of the tracking problem on `[0, horizon]` from `y(0) = y0`.
pub fn solve_finite_horizon(
    problem: &PeriodicLQProblem,
    y0: &DVector<f64>,
    horizon: f64,
    opts: &SolverOptions,
) -> Result<FiniteHorizon> {
    check_state(problem, y0)?;
    let n = problem.state_dim();
    let p = solve_riccati_terminal(problem, horizon, &DMatrix::zeros(n, n), opts)?;
    let r = solve_r_terminal(problem, &p, horizon, opts)?;
    let triple = synthesize_finite(problem, &p, &r, y0, opts)?;
    Ok(FiniteHorizon {
        triple,
        p,
        r,
        y0: y0.clone(),
    })
}

/// Periodic triple from precomputed `P_θ`, `r_θ` on `[0, θ]`.
pub fn synthesize_periodic(
    problem: &PeriodicLQProblem,
    p: &MatrixPath,
    r: &VectorPath,
    opts: &SolverOptions,
) -> Result<OptimalTriple> {
    let theta = problem.period();
    let closed = closed_loop_generator(problem, p, Some(theta));
    let forcing = |t: f64| -(problem.coefficients(t).s * r.eval_periodic(t, theta));
    let y = periodic_solution_linear(&closed, &forcing, problem.state_dim(), theta, opts)?;
    complete_triple(problem, y, p, r, Horizon::Periodic(theta))
}

/// The periodic optimal triple on `[0, θ]`.
pub fn solve_periodic_orbit(problem: &PeriodicLQProblem, opts: &SolverOptions) -> Result<PeriodicOrbit> {
    let riccati = solve_periodic_riccati(problem, opts)?;
    let offset = solve_periodic_r(problem, &riccati.path, opts)?;
    let triple = synthesize_periodic(problem, &riccati.path, &offset.path, opts)?;
    Ok(PeriodicOrbit {
        triple,
        riccati,
        offset,
    })
}

/// `e(t) = |y^T - y_θ| + |u^T - u_θ| + |λ^T - λ_θ|` on the finite grid, with
/// the periodic triple extended by wraparound.
pub fn deviation(finite: &OptimalTriple, periodic: &OptimalTriple) -> Result<VectorPath> {
    let theta = match periodic.horizon {
        Horizon::Periodic(theta) => theta,
        Horizon::Finite(_) => {
            return Err(Error::InvalidProblem("second triple must be periodic".into()));
        }
    };
    if finite.y.dim() != periodic.y.dim() || finite.u.dim() != periodic.u.dim() {
        return Err(Error::DimensionMismatch(
            "finite and periodic triples have different dimensions".into(),
        ));
    }
    let e: Vec<f64> = finite
        .grid()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            (&finite.y.values()[k] - periodic.y.eval_periodic(t, theta)).norm()
                + (&finite.u.values()[k] - periodic.u.eval_periodic(t, theta)).norm()
                + (&finite.lambda.values()[k] - periodic.lambda.eval_periodic(t, theta)).norm()
        })
        .collect();
    VectorPath::scalar(finite.grid().to_vec(), &e)
}

/// Deviation from the driving linear equations (see module docs).
#[derive(Clone, Debug)]
pub struct LayerDeviation {
    /// `y^T - y_θ`.
    pub delta: VectorPath,
    /// `P_θ y^T + r_θ - λ^T`.
    pub z: VectorPath,
    /// Same quantity as [`deviation`], resolved below integrator noise.
    pub e: VectorPath,
}

/// Tolerances for the layer equations: relative control only.
fn layer_options(opts: &SolverOptions) -> SolverOptions {
    let mut o = *opts;
    o.ode.atol = 1e-40;
    o
}

pub fn layer_deviation(
    problem: &PeriodicLQProblem,
    finite: &FiniteHorizon,
    periodic: &PeriodicOrbit,
    opts: &SolverOptions,
) -> Result<LayerDeviation> {
    let theta = periodic.period();
    let o = layer_options(opts);
    let grid = finite.triple.grid();
    let horizon = finite.triple.horizon.length();
    let p_theta = periodic.p();
    let closed = closed_loop_generator(problem, p_theta, Some(theta));

    let y_end = finite.triple.y.last();
    let z_end = p_theta.eval_periodic(horizon, theta) * y_end + periodic.r().eval_periodic(horizon, theta);
    let adjoint = |t: f64| -closed(t).transpose();
    let mut desc = grid.to_vec();
    desc.reverse();
    let z = propagate_samples(&adjoint, None, desc[0], &z_end, &desc, &o.ode)?;

    let delta0 = &finite.y0 - periodic.triple.y.first();
    let forcing = |t: f64| problem.coefficients(t).s * z.eval(t);
    let delta = propagate_samples(&closed, Some(&forcing), grid[0], &delta0, grid, &o.ode)?;

    let e: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let d = &delta.values()[k];
            let dl = p_theta.eval_periodic(t, theta) * d - &z.values()[k];
            d.norm() + (problem.gain(t) * &dl).norm() + dl.norm()
        })
        .collect();
    let e = VectorPath::scalar(grid.to_vec(), &e)?;
    Ok(LayerDeviation { delta, z, e })
}

/// Fitted two-sided exponential envelope `C (e^{-νt} + e^{-ν(T-t)})`.
#[derive(Clone, Debug, Serialize)]
pub struct TurnpikeFit {
    pub c_fit: f64,
    pub nu_fit: f64,
    /// Largest `|ln e - ln envelope|` over the points used in the fit.
    pub residual: f64,
    pub windows: [(f64, f64); 2],
    /// Decay rate from the initial window alone, if it had usable points.
    pub nu_initial: Option<f64>,
    /// Decay rate from the final window alone, if it had usable points.
    pub nu_final: Option<f64>,
    pub floor: f64,
    pub horizon: f64,
}

impl TurnpikeFit {
    pub fn envelope(&self, t: f64) -> f64 {
        self.c_fit * ((-self.nu_fit * t).exp() + (-self.nu_fit * (self.horizon - t)).exp())
    }

    /// Largest `e(t) - floor - envelope(t)` over the path; nonpositive when
    /// the envelope dominates.
    pub fn excess(&self, e: &VectorPath) -> f64 {
        e.grid()
            .iter()
            .zip(e.values())
            .map(|(&t, v)| v[0] - self.floor - self.envelope(t))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Default fit window length: three closed-loop time constants but at least
/// one period, capped at a quarter of the horizon.
///
/// A window shorter than the period picks up the periodic modulation of the
/// layer profile, so its slope depends on the phase of `T` modulo `θ`.
pub fn default_window(rho: f64, period: f64, horizon: f64) -> f64 {
    let layer = if rho.is_finite() && rho > 0.0 { 3.0 / rho } else { f64::INFINITY };
    layer.max(period).min(horizon / 4.0)
}

/// Least-squares line `y ≈ a + b x`; `None` with fewer than two points.
fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Fits the two-sided envelope to a scalar deviation path on `[0, T]`.
///
/// The decay rate is fitted separately on `[0, window]` (against `t`) and on
/// `[T - window, T]` (against `T - t`), using only points above `floor`, and
/// the two rates are averaged. `C` is the smallest constant for which the
/// envelope dominates `e` on the fitted points.
pub fn fit_envelope(e: &VectorPath, horizon: f64, floor: f64, window: f64) -> Result<TurnpikeFit> {
    if e.dim() != 1 {
        return Err(Error::DimensionMismatch("deviation must be scalar".into()));
    }
    if !(floor > 0.0) || !(window > 0.0) || !(horizon >= 4.0 * window * (1.0 - 1e-12)) {
        return Err(Error::InvalidProblem(format!(
            "need floor > 0 and horizon >= 4 x window (floor {floor}, window {window}, horizon {horizon})"
        )));
    }
    let samples: Vec<(f64, f64)> = e.grid().iter().zip(e.values()).map(|(&t, v)| (t, v[0])).collect();
    if samples.iter().all(|&(_, v)| !(v > floor)) {
        return Err(Error::DegenerateFit(format!("deviation is below {floor:e} everywhere")));
    }
    let tol = 1e-12 * (1.0 + horizon);
    let initial: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(t, v)| t <= window + tol && v > floor)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    let terminal: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(t, v)| t >= horizon - window - tol && v > floor)
        .map(|&(t, v)| (horizon - t, v.ln()))
        .collect();
    let nu_initial = least_squares(&initial).map(|(_, b)| -b);
    let nu_final = least_squares(&terminal).map(|(_, b)| -b);
    let nu_fit = match (nu_initial, nu_final) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::DegenerateFit("no fit window has two points above the floor".into()));
        }
    };
    if !(nu_fit > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted decay rate {nu_fit} is not positive")));
    }
    let profile = |t: f64| (-nu_fit * t).exp() + (-nu_fit * (horizon - t)).exp();
    let used: Vec<(f64, f64)> = initial
        .iter()
        .copied()
        .chain(terminal.iter().map(|&(s, l)| (horizon - s, l)))
        .collect();
    let log_c = used
        .iter()
        .map(|&(t, l)| l - profile(t).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let residual = used
        .iter()
        .map(|&(t, l)| (l - log_c - profile(t).ln()).abs())
        .fold(0.0, f64::max);
    Ok(TurnpikeFit {
        c_fit: log_c.exp(),
        nu_fit,
        residual,
        windows: [(0.0, window), (horizon - window, horizon)],
        nu_initial,
        nu_final,
        floor,
        horizon,
    })
}

/// Exponential fit `|P_θ(t) - P^T(t)| ≈ M e^{-μ (T - t)}`.
#[derive(Clone, Debug, Serialize)]
pub struct GapFit {
    pub m_fit: f64,
    pub mu_fit: f64,
    /// Largest `|ln gap - ln fit|` over the fitted points.
    pub residual: f64,
    /// Range of `T - t` covered by the fitted points.
    pub window: (f64, f64),
    pub points: usize,
    /// Closed-loop decay rate the gap rate is compared with.
    pub rho: f64,
    /// `μ / (2ρ)`.
    pub ratio: f64,
}

/// Spectral-norm gap `|P_θ(t) - P^T(t)|` on the grid of `p_finite`.
pub fn riccati_gap(p_finite: &MatrixPath, p_theta: &MatrixPath, period: f64) -> Result<VectorPath> {
    if p_finite.shape() != p_theta.shape() {
        return Err(Error::DimensionMismatch("Riccati paths have different shapes".into()));
    }
    let gap: Vec<f64> = p_finite
        .grid()
        .iter()
        .zip(p_finite.values())
        .map(|(&t, p)| spectral_norm(&(p_theta.eval_periodic(t, period) - p)))
        .collect();
    VectorPath::scalar(p_finite.grid().to_vec(), &gap)
}

/// Fits the terminal decay of the Riccati gap on the points where
/// `T - t <= T/2` and the gap exceeds `floor`.
pub fn riccati_gap_profile(
    p_finite: &MatrixPath,
    p_theta: &MatrixPath,
    horizon: f64,
    period: f64,
    rho: f64,
    floor: f64,
) -> Result<GapFit> {
    let gap = riccati_gap(p_finite, p_theta, period)?;
    let points: Vec<(f64, f64)> = gap
        .grid()
        .iter()
        .zip(gap.values())
        .filter(|&(&t, g)| horizon - t <= 0.5 * horizon && g[0] > floor)
        .map(|(&t, g)| (horizon - t, g[0].ln()))
        .collect();
    let (a, b) = least_squares(&points)
        .ok_or_else(|| Error::DegenerateFit(format!("Riccati gap is below {floor:e} everywhere")))?;
    let mu_fit = -b;
    if !(mu_fit > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted gap rate {mu_fit} is not positive")));
    }
    let residual = points
        .iter()
        .map(|&(s, l)| (l - a - b * s).abs())
        .fold(0.0, f64::max);
    let s_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let s_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(GapFit {
        m_fit: a.exp(),
        mu_fit,
        residual,
        window: (s_min, s_max),
        points: points.len(),
        rho,
        ratio: mu_fit / (2.0 * rho),
    })
}

/// Solution of the open-loop state equation under a given control.
pub fn simulate(
    problem: &PeriodicLQProblem,
    y0: &DVector<f64>,
    control: &(dyn Fn(f64) -> DVector<f64> + Sync),
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
) -> Result<(VectorPath, VectorPath)> {
    check_state(problem, y0)?;
    if !(t1 > t0) {
        return Err(Error::InvalidProblem(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    let grid = uniform_grid(t0, t1, opts.sample_step);
    let u0 = control(t0);
    if u0.len() != problem.control_dim() {
        return Err(Error::DimensionMismatch(format!(
            "control has length {}, expected {}",
            u0.len(),
            problem.control_dim()
        )));
    }
    let a = |t: f64| problem.a(t);
    let forcing = |t: f64| problem.b(t) * control(t);
    let y = propagate_samples(&a, Some(&forcing), t0, y0, &grid, &opts.ode)?;
    let u = VectorPath::from_samples(grid.clone(), grid.iter().map(|&t| control(t)).collect())?;
    Ok((y, u))
}

/// Largest defect `|y' - A y - B u|` over the grid points that carry a
/// five-point central difference for `y'`.
pub fn state_residual(problem: &PeriodicLQProblem, y: &VectorPath, u: &VectorPath) -> Result<f64> {
    same_grid(y.grid(), u.grid())?;
    Ok(max_defect(y, |k, t| problem.a(t) * &y.values()[k] + problem.b(t) * &u.values()[k]))
}

/// Largest per-step defect `|y_{k+1} - y_k - h/2 (f_k + f_{k+1})| / h` with
/// `f = A y + B u`, i.e. the state equation in trapezoid-integrated form.
///
/// Unlike pointwise differencing this stays small for trajectories from any
/// second-order scheme, including the oscillating stiff modes of the
/// implicit midpoint rule.
pub fn integrated_state_defect(problem: &PeriodicLQProblem, y: &VectorPath, u: &VectorPath) -> Result<f64> {
    same_grid(y.grid(), u.grid())?;
    let g = y.grid();
    let f: Vec<DVector<f64>> = g
        .iter()
        .enumerate()
        .map(|(k, &t)| problem.a(t) * &y.values()[k] + problem.b(t) * &u.values()[k])
        .collect();
    Ok((0..g.len().saturating_sub(1))
        .map(|k| {
            let h = g[k + 1] - g[k];
            ((&y.values()[k + 1] - &y.values()[k]) / h - (&f[k] + &f[k + 1]) * 0.5).norm()
        })
        .fold(0.0, f64::max))
}

/// Largest defect `|λ' + C^T C (y - y_d) + A^T λ|`, differenced as in
/// [`state_residual`].
pub fn adjoint_residual(problem: &PeriodicLQProblem, y: &VectorPath, lambda: &VectorPath) -> Result<f64> {
    same_grid(y.grid(), lambda.grid())?;
    Ok(max_defect(lambda, |k, t| {
        let co = problem.coefficients(t);
        &co.ctc * (&co.y_d - &y.values()[k]) - co.a.transpose() * &lambda.values()[k]
    }))
}

fn max_defect(x: &VectorPath, rhs: impl Fn(usize, f64) -> DVector<f64>) -> f64 {
    let g = x.grid();
    let v = x.values();
    let n = g.len();
    if n < 5 {
        return (1..n.saturating_sub(1))
            .map(|k| ((&v[k + 1] - &v[k - 1]) / (g[k + 1] - g[k - 1]) - rhs(k, g[k])).norm())
            .fold(0.0, f64::max);
    }
    (2..n - 2)
        .map(|k| {
            let h = (g[k + 2] - g[k - 2]) / 4.0;
            let d = (&v[k - 2] - &v[k + 2] + (&v[k + 1] - &v[k - 1]) * 8.0) / (12.0 * h);
            (d - rhs(k, g[k])).norm()
        })
        .fold(0.0, f64::max)
}

/// Both sides of the dissipation inequality along one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct DissipationReport {
    pub t0: f64,
    pub t1: f64,
    /// Storage `S(t0, y(t0))`.
    pub storage_start: f64,
    /// Storage `S(t1, y(t1))`.
    pub storage_end: f64,
    /// `∫ ω dt` with `ω = ℓ(y, u) - ℓ(y_θ, u_θ)`.
    pub supply: f64,
    /// `S(t0) + ∫ω - S(t1)`.
    pub slack: f64,
    /// `1/2 ∫ |C(y - y_θ)|^2 + <Q(u - u_θ), u - u_θ>`, which the slack equals
    /// for exact solutions.
    pub quadratic_gap: f64,
    pub tolerance: f64,
    pub state_defect: f64,
    pub passed: bool,
}

/// Checks `S(t0, y(t0)) + ∫ω ≥ S(t1, y(t1))` with
/// `S(t, y) = -<y - y_θ(t), P_θ(t) y_θ(t) + r_θ(t)>`.
///
/// The trajectory must satisfy the state equation for its control up to
/// `opts.residual_tol` (relative to its slope magnitude), measured by
/// [`integrated_state_defect`].
pub fn check_dissipation(
    problem: &PeriodicLQProblem,
    y: &VectorPath,
    u: &VectorPath,
    periodic: &PeriodicOrbit,
    t0: f64,
    t1: f64,
    opts: &SolverOptions,
) -> Result<DissipationReport> {
    let defect = integrated_state_defect(problem, y, u)?;
    let scale = 1.0 + y.slopes().iter().map(|s| s.norm()).fold(0.0, f64::max);
    if !(defect <= opts.residual_tol * scale) {
        return Err(Error::InvalidTrajectory { defect });
    }
    let slack_t = 1e-9 * (1.0 + t1.abs());
    if !(t1 > t0) || t0 < y.start() - slack_t || t1 > y.end() + slack_t {
        return Err(Error::GridMismatch(format!(
            "[{t0}, {t1}] is not inside the trajectory span [{}, {}]",
            y.start(),
            y.end()
        )));
    }
    let theta = periodic.period();
    let orbit = &periodic.triple;
    let p_theta = periodic.p();
    let r_theta = periodic.r();
    let storage = |t: f64| {
        let yt = orbit.y.eval_periodic(t, theta);
        let lam = p_theta.eval_periodic(t, theta) * &yt + r_theta.eval_periodic(t, theta);
        -(y.eval(t) - yt).dot(&lam)
    };
    let supply = trapezoid_on_grid(y.grid(), t0, t1, |t| {
        problem.running_cost(t, &y.eval(t), &u.eval(t))
            - problem.running_cost(t, &orbit.y.eval_periodic(t, theta), &orbit.u.eval_periodic(t, theta))
    });
    let quadratic_gap = trapezoid_on_grid(y.grid(), t0, t1, |t| {
        let co = problem.coefficients(t);
        let dy = y.eval(t) - orbit.y.eval_periodic(t, theta);
        let du = u.eval(t) - orbit.u.eval_periodic(t, theta);
        0.5 * ((&co.c * &dy).norm_squared() + du.dot(&(&co.q * &du)))
    });
    let (s0, s1) = (storage(t0), storage(t1));
    let slack = s0 + supply - s1;
    let magnitude = s0.abs() + s1.abs() + supply.abs() + quadratic_gap;
    let tolerance = 1e-7 * (1.0 + magnitude);
    Ok(DissipationReport {
        t0,
        t1,
        storage_start: s0,
        storage_end: s1,
        supply,
        slack,
        quadratic_gap,
        tolerance,
        state_defect: defect,
        passed: slack >= -tolerance,
    })
}
