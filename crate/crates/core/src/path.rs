//! Grid-sampled matrix and vector valued functions of time.
//!
//! A [`Path`] stores values and time derivatives on a strictly increasing
//! grid and evaluates between samples by piecewise cubic Hermite
//! interpolation. When exact derivatives are not available they are
//! estimated with second-order three-point differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Values that can be stored in a [`Path`].
pub trait PathValue: Clone + std::fmt::Debug {
    /// `sum_i c_i * v_i`; `terms` is never empty.
    fn combine(terms: &[(f64, &Self)]) -> Self;
    /// Norm used for sup-distances (spectral norm for matrices).
    fn size(&self) -> f64;
    fn shape(&self) -> (usize, usize);
}

impl PathValue for DVector<f64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1 * terms[0].0;
        for (c, v) in &terms[1..] {
            out.axpy(*c, *v, 1.0);
        }
        out
    }

    fn size(&self) -> f64 {
        self.norm()
    }

    fn shape(&self) -> (usize, usize) {
        (self.len(), 1)
    }
}

impl PathValue for DMatrix<f64> {
    fn combine(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1 * terms[0].0;
        for (c, v) in &terms[1..] {
            out += *v * *c;
        }
        out
    }

    fn size(&self) -> f64 {
        spectral_norm(self)
    }

    fn shape(&self) -> (usize, usize) {
        self.shape()
    }
}

/// Spectral norm; uses the symmetric eigenvalues when the matrix is symmetric.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.is_square() && symmetry_defect(m) <= 1e-14 * (1.0 + m.amax()) {
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().amax()
    } else {
        m.singular_values().max()
    }
}

/// Frobenius norm of `m - m^T`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

/// Sampled function of time with Hermite interpolation.
#[derive(Clone, Debug)]
pub struct Path<V: PathValue> {
    grid: Vec<f64>,
    values: Vec<V>,
    slopes: Vec<V>,
}

pub type MatrixPath = Path<DMatrix<f64>>;
pub type VectorPath = Path<DVector<f64>>;

impl<V: PathValue> Path<V> {
    /// Builds a path from samples and exact derivatives.
    pub fn new(grid: Vec<f64>, values: Vec<V>, slopes: Vec<V>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() || slopes.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} points but {} values and {} slopes",
                grid.len(),
                values.len(),
                slopes.len()
            )));
        }
        let shape = values[0].shape();
        if values.iter().chain(slopes.iter()).any(|v| v.shape() != shape) {
            return Err(Error::DimensionMismatch(
                "inconsistent sample shapes".into(),
            ));
        }
        Ok(Path {
            grid,
            values,
            slopes,
        })
    }

    /// Builds a path from samples only; derivatives come from three-point
    /// differences (one-sided at the ends).
    pub fn from_samples(grid: Vec<f64>, values: Vec<V>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        let slopes = finite_difference_slopes(&grid, &values);
        Self::new(grid, values, slopes)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn slopes(&self) -> &[V] {
        &self.slopes
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn first(&self) -> &V {
        &self.values[0]
    }

    pub fn last(&self) -> &V {
        self.values.last().unwrap()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    /// Hermite interpolation at `t`; `t` is clamped to the grid span.
    pub fn eval(&self, t: f64) -> V {
        let n = self.grid.len();
        if n == 1 || t <= self.grid[0] {
            return self.values[0].clone();
        }
        if t >= self.grid[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.grid.partition_point(|&g| g <= t) - 1;
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        if t == t0 {
            return self.values[k].clone();
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        V::combine(&[
            (h00, &self.values[k]),
            (h10 * h, &self.slopes[k]),
            (h01, &self.values[k + 1]),
            (h11 * h, &self.slopes[k + 1]),
        ])
    }

    /// Evaluates a path covering one period `[t0, t0 + period]` at any time
    /// by wraparound.
    pub fn eval_periodic(&self, t: f64, period: f64) -> V {
        self.eval(self.wrap(t, period))
    }

    /// Maps `t` into `[start, start + period]`.
    pub fn wrap(&self, t: f64, period: f64) -> f64 {
        let t0 = self.grid[0];
        t0 + (t - t0).rem_euclid(period)
    }

    /// Resamples onto another grid (periodically when `period` is given).
    pub fn resample(&self, grid: &[f64], period: Option<f64>) -> Result<Self> {
        let eval = |t: f64| match period {
            Some(p) => self.eval_periodic(t, p),
            None => self.eval(t),
        };
        let values: Vec<V> = grid.iter().map(|&t| eval(t)).collect();
        let slopes: Vec<V> = grid
            .iter()
            .map(|&t| {
                let s = match period {
                    Some(p) => self.wrap(t, p),
                    None => t.clamp(self.start(), self.end()),
                };
                self.derivative(s)
            })
            .collect();
        Self::new(grid.to_vec(), values, slopes)
    }

    /// Derivative of the Hermite interpolant at `t`.
    pub fn derivative(&self, t: f64) -> V {
        let n = self.grid.len();
        if n == 1 {
            return self.slopes[0].clone();
        }
        let t = t.clamp(self.grid[0], self.grid[n - 1]);
        let k = (self.grid.partition_point(|&g| g <= t).max(1) - 1).min(n - 2);
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        V::combine(&[
            (d00, &self.values[k]),
            (d10, &self.slopes[k]),
            (d01, &self.values[k + 1]),
            (d11, &self.slopes[k + 1]),
        ])
    }

    /// Largest pointwise distance on the shared grid.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| V::combine(&[(1.0, a), (-1.0, b)]).size())
            .fold(0.0, f64::max))
    }

    /// Largest pointwise norm.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(V::size).fold(0.0, f64::max)
    }

    /// Applies `f` samplewise to values and slopes.
    pub fn map<W: PathValue>(&self, f: impl Fn(f64, &V, &V) -> (W, W)) -> Path<W> {
        let (values, slopes) = self
            .grid
            .iter()
            .zip(self.values.iter().zip(&self.slopes))
            .map(|(&t, (v, d))| f(t, v, d))
            .unzip();
        Path {
            grid: self.grid.clone(),
            values,
            slopes,
        }
    }
}

impl MatrixPath {
    /// Largest Frobenius norm of `P - P^T` over the grid.
    pub fn max_symmetry_defect(&self) -> f64 {
        self.values
            .iter()
            .map(symmetry_defect)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the grid (values are symmetrized first).
    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(|m| {
                let sym = (m + m.transpose()) * 0.5;
                sym.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl VectorPath {
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Scalar path of Euclidean norms (interpolation slopes by differences).
    pub fn norms(&self) -> Result<VectorPath> {
        let values = self
            .values
            .iter()
            .map(|v| DVector::from_element(1, v.norm()))
            .collect();
        VectorPath::from_samples(self.grid.clone(), values)
    }

    /// Component `i` as a plain vector of samples.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    /// Scalar path from plain samples.
    pub fn scalar(grid: Vec<f64>, samples: &[f64]) -> Result<VectorPath> {
        let values = samples
            .iter()
            .map(|&x| DVector::from_element(1, x))
            .collect();
        VectorPath::from_samples(grid, values)
    }
}

/// Uniform grid on `[a, b]` with spacing at most `max_step`; endpoints exact.
pub fn uniform_grid(a: f64, b: f64, max_step: f64) -> Vec<f64> {
    assert!(b >= a && max_step > 0.0);
    if b == a {
        return vec![a];
    }
    let n = ((b - a) / max_step - 1e-9).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    grid.push(b);
    grid
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::GridMismatch("grid is not strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len()
        || a
            .iter()
            .zip(b)
            .any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(Error::GridMismatch(format!(
            "grids differ ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn finite_difference_slopes<V: PathValue>(grid: &[f64], values: &[V]) -> Vec<V> {
    let n = grid.len();
    if n == 1 {
        return vec![V::combine(&[(0.0, &values[0])])];
    }
    if n == 2 {
        let d = V::combine(&[(1.0, &values[1]), (-1.0, &values[0])]);
        let d = V::combine(&[(1.0 / (grid[1] - grid[0]), &d)]);
        return vec![d.clone(), d];
    }
    // three-point Lagrange derivative at node `at` of the stencil starting at k
    let stencil = |k: usize, at: usize| {
        let (x0, x1, x2) = (grid[k], grid[k + 1], grid[k + 2]);
        let x = grid[at];
        let c0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
        let c1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
        let c2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
        V::combine(&[(c0, &values[k]), (c1, &values[k + 1]), (c2, &values[k + 2])])
    };
    (0..n)
        .map(|i| match i {
            0 => stencil(0, 0),
            i if i == n - 1 => stencil(n - 3, n - 1),
            i => stencil(i - 1, i),
        })
        .collect()
}
