//! Time-periodic linear-quadratic tracking problems in finite dimension.
//!
//! The state obeys `y' = A(t) y + B(t) u` and the cost over `[t0, t1]` is
//! `1/2 ∫ |C(t)(y - y_d(t))|^2 + <Q(t) u, u> dt`. All coefficient maps share
//! one period and are sampled on demand.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{same_grid, VectorPath};

pub type MatrixMap = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type VectorMap = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Default relative tolerance for periodicity defects.
pub const PERIODICITY_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct PeriodicLQProblem {
    state_dim: usize,
    control_dim: usize,
    period: f64,
    q_floor: f64,
    a: MatrixMap,
    b: MatrixMap,
    c: MatrixMap,
    q: MatrixMap,
    y_d: VectorMap,
}

impl fmt::Debug for PeriodicLQProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicLQProblem")
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .field("period", &self.period)
            .field("q_floor", &self.q_floor)
            .finish_non_exhaustive()
    }
}

/// Coefficients evaluated at one instant, with the derived products the
/// solvers use.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// `Q^{-1} B^T`
    pub gain: DMatrix<f64>,
    /// `B Q^{-1} B^T`
    pub s: DMatrix<f64>,
    /// `C^T C`
    pub ctc: DMatrix<f64>,
    pub y_d: DVector<f64>,
}

impl PeriodicLQProblem {
    pub fn builder(state_dim: usize, control_dim: usize, period: f64) -> ProblemBuilder {
        ProblemBuilder {
            state_dim,
            control_dim,
            period,
            q_floor: None,
            a: None,
            b: None,
            c: None,
            q: None,
            y_d: None,
        }
    }

    /// Builder pre-filled with this problem's maps, for substitutions.
    pub fn to_builder(&self) -> ProblemBuilder {
        ProblemBuilder {
            state_dim: self.state_dim,
            control_dim: self.control_dim,
            period: self.period,
            q_floor: Some(self.q_floor),
            a: Some(self.a.clone()),
            b: Some(self.b.clone()),
            c: Some(self.c.clone()),
            q: Some(self.q.clone()),
            y_d: Some(self.y_d.clone()),
        }
    }

    /// Time-invariant problem with constant coefficients.
    pub fn constant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        y_d: DVector<f64>,
        period: f64,
    ) -> Result<Self> {
        let q_floor = 0.5 * q.clone().symmetric_eigenvalues().min();
        if !(q_floor > 0.0) {
            return Err(Error::InvalidProblem("Q must be positive definite".into()));
        }
        Self::builder(a.nrows(), b.ncols(), period)
            .q_floor(q_floor)
            .a(move |_| a.clone())
            .b(move |_| b.clone())
            .c(move |_| c.clone())
            .q(move |_| q.clone())
            .y_d(move |_| y_d.clone())
            .build()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn q_floor(&self) -> f64 {
        self.q_floor
    }

    pub fn a(&self, t: f64) -> DMatrix<f64> {
        (self.a)(t)
    }

    pub fn b(&self, t: f64) -> DMatrix<f64> {
        (self.b)(t)
    }

    pub fn c(&self, t: f64) -> DMatrix<f64> {
        (self.c)(t)
    }

    pub fn q(&self, t: f64) -> DMatrix<f64> {
        (self.q)(t)
    }

    pub fn y_d(&self, t: f64) -> DVector<f64> {
        (self.y_d)(t)
    }

    pub fn coefficients(&self, t: f64) -> Coefficients {
        let a = self.a(t);
        let b = self.b(t);
        let c = self.c(t);
        let q = self.q(t);
        let gain = solve_spd(&q, &b.transpose());
        let s = &b * &gain;
        let s = (&s + s.transpose()) * 0.5;
        let ctc = c.transpose() * &c;
        Coefficients {
            a,
            b,
            c,
            q,
            gain,
            s,
            ctc,
            y_d: self.y_d(t),
        }
    }

    /// `Q^{-1}(t) B^T(t)`.
    pub fn gain(&self, t: f64) -> DMatrix<f64> {
        solve_spd(&self.q(t), &self.b(t).transpose())
    }

    /// Time derivative of `Q^{-1} B^T` by a centered difference of the maps.
    pub fn gain_derivative(&self, t: f64) -> DMatrix<f64> {
        let h = 1e-5 * (1.0 + self.period);
        (self.gain(t + h) - self.gain(t - h)) / (2.0 * h)
    }

    /// `1/2 (|C(y - y_d)|^2 + <Q u, u>)`.
    pub fn running_cost(&self, t: f64, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let c = self.c(t);
        let dev = &c * (y - self.y_d(t));
        let qu = self.q(t) * u;
        0.5 * (dev.norm_squared() + u.dot(&qu))
    }

    /// Checks periodicity, `Q - eps I >= 0` and `C` symmetric PSD on
    /// `n_samples` equispaced points of one period.
    pub fn validate(&self, n_samples: usize) -> Result<ValidationReport> {
        self.validate_with(n_samples, PERIODICITY_TOL)
    }

    pub fn validate_with(&self, n_samples: usize, tolerance: f64) -> Result<ValidationReport> {
        if n_samples < 2 {
            return Err(Error::InvalidProblem("validation needs at least 2 samples".into()));
        }
        let theta = self.period;
        let times: Vec<f64> = (0..n_samples)
            .map(|k| theta * k as f64 / n_samples as f64)
            .collect();
        let mdef = |f: &MatrixMap| {
            times
                .iter()
                .map(|&t| {
                    let now = f(t);
                    (f(t + theta) - &now).norm() / now.norm().max(1.0)
                })
                .fold(0.0, f64::max)
        };
        let defects = PeriodicityDefects {
            a: mdef(&self.a),
            b: mdef(&self.b),
            c: mdef(&self.c),
            q: mdef(&self.q),
            y_d: times
                .iter()
                .map(|&t| {
                    let now = self.y_d(t);
                    (self.y_d(t + theta) - &now).norm() / now.norm().max(1.0)
                })
                .fold(0.0, f64::max),
        };
        let mut min_q_margin = f64::INFINITY;
        let mut min_q_eigenvalue = f64::INFINITY;
        let mut min_c_eigenvalue = f64::INFINITY;
        let mut max_c_asymmetry: f64 = 0.0;
        let mut shapes_ok = true;
        for &t in &times {
            let q = self.q(t);
            let c = self.c(t);
            let (a, b, yd) = (self.a(t), self.b(t), self.y_d(t));
            shapes_ok &= a.shape() == (self.state_dim, self.state_dim)
                && b.shape() == (self.state_dim, self.control_dim)
                && c.shape() == (self.state_dim, self.state_dim)
                && q.shape() == (self.control_dim, self.control_dim)
                && yd.len() == self.state_dim;
            if !shapes_ok {
                break;
            }
            let q_sym = (&q + q.transpose()) * 0.5;
            min_q_eigenvalue = min_q_eigenvalue.min(q_sym.clone().symmetric_eigenvalues().min());
            let shifted = q_sym - DMatrix::identity(self.control_dim, self.control_dim) * self.q_floor;
            min_q_margin = min_q_margin.min(shifted.symmetric_eigenvalues().min());
            max_c_asymmetry = max_c_asymmetry.max((&c - c.transpose()).norm());
            let c_sym = (&c + c.transpose()) * 0.5;
            min_c_eigenvalue = min_c_eigenvalue.min(c_sym.symmetric_eigenvalues().min());
        }
        if !shapes_ok {
            return Err(Error::DimensionMismatch(
                "a coefficient map returned the wrong shape".into(),
            ));
        }
        let eig_tol = 1e-12;
        let passed = defects.max() <= tolerance
            && min_q_margin >= -eig_tol
            && min_c_eigenvalue >= -eig_tol
            && max_c_asymmetry <= 1e-12;
        Ok(ValidationReport {
            n_samples,
            tolerance,
            periodicity_defects: defects,
            min_q_eigenvalue,
            min_q_margin,
            min_c_eigenvalue,
            max_c_asymmetry,
            passed,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicityDefects {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
    pub y_d: f64,
}

impl PeriodicityDefects {
    pub fn max(&self) -> f64 {
        [self.a, self.b, self.c, self.q, self.y_d]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub tolerance: f64,
    pub periodicity_defects: PeriodicityDefects,
    pub min_q_eigenvalue: f64,
    /// Smallest eigenvalue of `Q(t) - eps I` over the samples.
    pub min_q_margin: f64,
    pub min_c_eigenvalue: f64,
    pub max_c_asymmetry: f64,
    pub passed: bool,
}

pub struct ProblemBuilder {
    state_dim: usize,
    control_dim: usize,
    period: f64,
    q_floor: Option<f64>,
    a: Option<MatrixMap>,
    b: Option<MatrixMap>,
    c: Option<MatrixMap>,
    q: Option<MatrixMap>,
    y_d: Option<VectorMap>,
}

impl ProblemBuilder {
    pub fn q_floor(mut self, eps: f64) -> Self {
        self.q_floor = Some(eps);
        self
    }

    pub fn a(mut self, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.a = Some(Arc::new(f));
        self
    }

    pub fn b(mut self, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.b = Some(Arc::new(f));
        self
    }

    pub fn c(mut self, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.c = Some(Arc::new(f));
        self
    }

    pub fn q(mut self, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.q = Some(Arc::new(f));
        self
    }

    pub fn y_d(mut self, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.y_d = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> Result<PeriodicLQProblem> {
        if self.state_dim == 0 || self.control_dim == 0 {
            return Err(Error::InvalidProblem("dimensions must be positive".into()));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        let q_floor = self.q_floor.unwrap_or(1.0);
        if !(q_floor > 0.0) {
            return Err(Error::InvalidProblem("q_floor must be positive".into()));
        }
        let missing = |name: &str| Error::InvalidProblem(format!("missing coefficient {name}"));
        let n = self.state_dim;
        Ok(PeriodicLQProblem {
            state_dim: n,
            control_dim: self.control_dim,
            period: self.period,
            q_floor,
            a: self.a.ok_or_else(|| missing("A"))?,
            b: self.b.ok_or_else(|| missing("B"))?,
            c: self.c.ok_or_else(|| missing("C"))?,
            q: self.q.ok_or_else(|| missing("Q"))?,
            y_d: self.y_d.unwrap_or_else(|| Arc::new(move |_| DVector::zeros(n))),
        })
    }
}

fn solve_spd(q: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    match q.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => q
            .clone()
            .lu()
            .solve(rhs)
            .unwrap_or_else(|| DMatrix::from_element(rhs.nrows(), rhs.ncols(), f64::NAN)),
    }
}

/// `1/2 ∫_{t0}^{t1} |C(y - y_d)|^2 + <Q u, u> dt` by the composite
/// trapezoid rule on the trajectory's own grid.
pub fn evaluate_cost(
    problem: &PeriodicLQProblem,
    y: &VectorPath,
    u: &VectorPath,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    same_grid(y.grid(), u.grid())?;
    if y.dim() != problem.state_dim() || u.dim() != problem.control_dim() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory dims ({}, {}) vs problem ({}, {})",
            y.dim(),
            u.dim(),
            problem.state_dim(),
            problem.control_dim()
        )));
    }
    let slack = 1e-9 * (1.0 + t1.abs());
    if t1 < t0 || t0 < y.start() - slack || t1 > y.end() + slack {
        return Err(Error::GridMismatch(format!(
            "[{t0}, {t1}] is not inside the trajectory span [{}, {}]",
            y.start(),
            y.end()
        )));
    }
    let f = |t: f64| problem.running_cost(t, &y.eval(t), &u.eval(t));
    Ok(trapezoid_on_grid(y.grid(), t0, t1, f))
}

/// Composite trapezoid of `f` over `[t0, t1]` using the grid points inside
/// the interval plus the interval endpoints.
pub(crate) fn trapezoid_on_grid(grid: &[f64], t0: f64, t1: f64, f: impl Fn(f64) -> f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    let tol = 1e-12 * (1.0 + t1.abs());
    let mut nodes = vec![t0];
    nodes.extend(grid.iter().copied().filter(|&t| t > t0 + tol && t < t1 - tol));
    nodes.push(t1);
    let values: Vec<f64> = nodes.iter().map(|&t| f(t)).collect();
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
