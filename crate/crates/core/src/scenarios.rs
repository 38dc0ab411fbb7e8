//! Concrete problems: the scalar example, a constant-coefficient test
//! problem, and finite-difference semi-discretizations of a controlled heat
//! equation and a damped wave equation on an interval.
//!
//! Scenarios are described by JSON documents of the form
//! `{"name": ..., "parameters": {...}}`; omitted parameters take the values
//! of the default descriptors shipped in `scenarios/`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::OdeOptions;
use crate::options::SolverOptions;
use crate::problem::PeriodicLQProblem;

pub const SCENARIO_NAMES: [&str; 4] = ["scalar_example", "constant_test", "heat_1d", "wave_1d"];

const DEFAULT_SCALAR: &str = include_str!("../scenarios/scalar_example.json");
const DEFAULT_CONSTANT: &str = include_str!("../scenarios/constant_test.json");
const DEFAULT_HEAT: &str = include_str!("../scenarios/heat_1d.json");
const DEFAULT_WAVE: &str = include_str!("../scenarios/wave_1d.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    pub name: String,
    #[serde(default)]
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

impl ScenarioDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(format!("bad descriptor: {e}")))
    }

    /// The shipped default descriptor for a scenario name.
    pub fn default_for(name: &str) -> Result<Self> {
        let text = match name {
            "scalar_example" => DEFAULT_SCALAR,
            "constant_test" => DEFAULT_CONSTANT,
            "heat_1d" => DEFAULT_HEAT,
            "wave_1d" => DEFAULT_WAVE,
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown scenario {other:?}; expected one of {SCENARIO_NAMES:?}"
                )))
            }
        };
        Self::from_json(text)
    }

    /// Resolves a scenario name or a path to a descriptor file.
    pub fn resolve(arg: &str) -> Result<Self> {
        let path = std::path::Path::new(arg);
        if path.is_file() {
            Self::from_json(&std::fs::read_to_string(path)?)
        } else {
            Self::default_for(arg)
        }
    }

    /// Same descriptor with one parameter replaced.
    pub fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.parameters.insert(key.to_owned(), value);
        self
    }

    /// Default parameters overlaid with this descriptor's parameters.
    fn merged(&self) -> Result<serde_json::Value> {
        let mut params = Self::default_for(&self.name)?.parameters;
        for (k, v) in &self.parameters {
            params.insert(k.clone(), v.clone());
        }
        Ok(serde_json::Value::Object(params))
    }

    fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.merged()?)
            .map_err(|e| Error::InvalidScenario(format!("{}: {e}", self.name)))
    }
}

/// Space-time coefficient `a(x, t)` of the PDE scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    /// `amplitude (1 + sin(2π t / θ)) bump(x)` with a smooth bump of height 1
    /// supported on `(center - half_width, center + half_width)`.
    PeriodicBump { amplitude: f64, center: f64, half_width: f64 },
    /// `mean + amplitude sin(2π t / θ)`, uniform in space.
    Harmonic { mean: f64, amplitude: f64 },
}

impl CoefficientSpec {
    pub fn eval(&self, x: f64, t: f64, period: f64) -> f64 {
        match *self {
            CoefficientSpec::Constant { value } => value,
            CoefficientSpec::PeriodicBump {
                amplitude,
                center,
                half_width,
            } => amplitude * (1.0 + (2.0 * PI * t / period).sin()) * bump((x - center) / half_width),
            CoefficientSpec::Harmonic { mean, amplitude } => mean + amplitude * (2.0 * PI * t / period).sin(),
        }
    }
}

/// `exp(1 - 1/(1 - s^2))` on `|s| < 1`, zero outside.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Tracking target `y_d(x, t)` of the PDE scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TargetSpec {
    Zero,
    /// `amplitude sin(π x / L) cos(2π t / θ)`.
    SineCos { amplitude: f64 },
}

impl TargetSpec {
    pub fn eval(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        match *self {
            TargetSpec::Zero => 0.0,
            TargetSpec::SineCos { amplitude } => {
                amplitude * (PI * x / length).sin() * (2.0 * PI * t / period).cos()
            }
        }
    }
}

/// Initial profile `y(x, 0)` of the PDE scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude sin(π x / L)`.
    Sine { amplitude: f64 },
}

impl InitialSpec {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match *self {
            InitialSpec::Zero => 0.0,
            InitialSpec::Constant { value } => value,
            InitialSpec::Sine { amplitude } => amplitude * (PI * x / length).sin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarParams {
    pub y0: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q: f64,
    pub y_d: f64,
    pub period: f64,
    pub y0: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatParams {
    /// Interior grid points.
    pub n: usize,
    pub length: f64,
    pub control_window: (f64, f64),
    pub period: f64,
    pub a_coeff: CoefficientSpec,
    pub y_d: TargetSpec,
    pub initial_state: InitialSpec,
    pub horizon: f64,
    /// Fixed-step implicit integration (step = output spacing).
    pub stiff: bool,
    /// Output spacing as a fraction of the period.
    pub samples_per_period: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveParams {
    pub n: usize,
    pub length: f64,
    pub period: f64,
    pub a_coeff: CoefficientSpec,
    pub y_d: TargetSpec,
    /// Initial displacement; the initial velocity is zero.
    pub initial_state: InitialSpec,
    pub horizon: f64,
    pub samples_per_period: usize,
}

/// The scalar example: `A = sin t`, `B = Q = 1`, `C^2 = 4 - sin^2 t - cos t`,
/// `y_d = cos t`, period `2π`, `y(0) = 0.1`.
pub fn scalar_example() -> (PeriodicLQProblem, DVector<f64>) {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let problem = PeriodicLQProblem::builder(1, 1, 2.0 * PI)
        .q_floor(1.0)
        .a(move |t| s(t.sin()))
        .b(move |_| s(1.0))
        .c(move |t| s((4.0 - t.sin().powi(2) - t.cos()).sqrt()))
        .q(move |_| s(1.0))
        .y_d(|t| DVector::from_element(1, t.cos()))
        .build()
        .expect("scalar example is well formed");
    (problem, DVector::from_element(1, 0.1))
}

pub fn constant_test(p: &ConstantParams) -> Result<PeriodicLQProblem> {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    if !(p.q > 0.0) || !(p.c >= 0.0) {
        return Err(Error::InvalidScenario("constant_test needs q > 0 and c >= 0".into()));
    }
    PeriodicLQProblem::constant(s(p.a), s(p.b), s(p.c), s(p.q), DVector::from_element(1, p.y_d), p.period)
}

/// Interior nodes `x_i = i h`, `h = L / (n + 1)`.
pub fn interior_nodes(n: usize, length: f64) -> Vec<f64> {
    let h = length / (n + 1) as f64;
    (1..=n).map(|i| i as f64 * h).collect()
}

/// Second-difference Laplacian with homogeneous Dirichlet ends, divided by
/// `h^2`.
pub fn dirichlet_laplacian(n: usize, length: f64) -> DMatrix<f64> {
    let h = length / (n + 1) as f64;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = -2.0;
        if i > 0 {
            d[(i, i - 1)] = 1.0;
        }
        if i + 1 < n {
            d[(i, i + 1)] = 1.0;
        }
    }
    d / (h * h)
}

/// `y_t = y_xx - a(x, t) y + χ_ω u` on `(0, L)` with Dirichlet ends, cost
/// weights `C = Q = I`.
pub fn heat_1d(p: &HeatParams) -> Result<PeriodicLQProblem> {
    if p.n < 3 || !(p.length > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "heat_1d needs n >= 3 and length > 0 (got n = {}, length = {})",
            p.n, p.length
        )));
    }
    let (lo, hi) = p.control_window;
    if !(0.0 <= lo && lo < hi && hi <= p.length) {
        return Err(Error::InvalidScenario(format!("control window ({lo}, {hi}) is not inside (0, {})", p.length)));
    }
    let nodes = interior_nodes(p.n, p.length);
    let actuated: Vec<usize> = (0..p.n).filter(|&i| nodes[i] > lo && nodes[i] < hi).collect();
    if actuated.is_empty() {
        return Err(Error::InvalidScenario(format!(
            "control window ({lo}, {hi}) contains no grid point"
        )));
    }
    let n = p.n;
    let m = actuated.len();
    let mut b = DMatrix::zeros(n, m);
    for (j, &i) in actuated.iter().enumerate() {
        b[(i, j)] = 1.0;
    }
    let lap = dirichlet_laplacian(n, p.length);
    let (a_spec, target, period, length) = (p.a_coeff, p.y_d, p.period, p.length);
    let nodes_a = nodes.clone();
    PeriodicLQProblem::builder(n, m, period)
        .q_floor(1.0)
        .a(move |t| {
            let mut a = lap.clone();
            for (i, &x) in nodes_a.iter().enumerate() {
                a[(i, i)] -= a_spec.eval(x, t, period);
            }
            a
        })
        .b(move |_| b.clone())
        .c(move |_| DMatrix::identity(n, n))
        .q(move |_| DMatrix::identity(m, m))
        .y_d(move |t| DVector::from_iterator(n, nodes.iter().map(|&x| target.eval(x, t, length, period))))
        .build()
}

/// `y_tt = y_xx - a(x, t) y_t + u` as a first-order system in
/// `(y, y_t)`, observing and tracking the velocity.
pub fn wave_1d(p: &WaveParams) -> Result<PeriodicLQProblem> {
    if p.n < 3 || !(p.length > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "wave_1d needs n >= 3 and length > 0 (got n = {}, length = {})",
            p.n, p.length
        )));
    }
    let n = p.n;
    let nodes = interior_nodes(n, p.length);
    let lap = dirichlet_laplacian(n, p.length);
    let (a_spec, target, period, length) = (p.a_coeff, p.y_d, p.period, p.length);
    let mut b = DMatrix::zeros(2 * n, n);
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        b[(n + i, i)] = 1.0;
        c[(n + i, n + i)] = 1.0;
    }
    let nodes_a = nodes.clone();
    PeriodicLQProblem::builder(2 * n, n, period)
        .q_floor(1.0)
        .a(move |t| {
            let mut a = DMatrix::zeros(2 * n, 2 * n);
            a.view_mut((0, n), (n, n)).fill_with_identity();
            a.view_mut((n, 0), (n, n)).copy_from(&lap);
            for (i, &x) in nodes_a.iter().enumerate() {
                a[(n + i, n + i)] = -a_spec.eval(x, t, period);
            }
            a
        })
        .b(move |_| b.clone())
        .c(move |_| c.clone())
        .q(move |_| DMatrix::identity(n, n))
        .y_d(move |t| {
            let mut y = DVector::zeros(2 * n);
            for (i, &x) in nodes.iter().enumerate() {
                y[n + i] = target.eval(x, t, length, period);
            }
            y
        })
        .build()
}

/// A fully specified problem instance with its default horizon and solver
/// settings.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub descriptor: ScenarioDescriptor,
    pub problem: PeriodicLQProblem,
    pub y0: DVector<f64>,
    pub horizon: f64,
    pub solver: SolverOptions,
}

impl Scenario {
    pub fn from_descriptor(descriptor: &ScenarioDescriptor) -> Result<Self> {
        let mut solver = SolverOptions::default();
        let (problem, y0, horizon) = match descriptor.name.as_str() {
            "scalar_example" => {
                let p: ScalarParams = descriptor.params()?;
                let (problem, _) = scalar_example();
                (problem, DVector::from_element(1, p.y0), p.horizon)
            }
            "constant_test" => {
                let p: ConstantParams = descriptor.params()?;
                (constant_test(&p)?, DVector::from_element(1, p.y0), p.horizon)
            }
            "heat_1d" => {
                let p: HeatParams = descriptor.params()?;
                let y0 = DVector::from_iterator(
                    p.n,
                    interior_nodes(p.n, p.length).iter().map(|&x| p.initial_state.eval(x, p.length)),
                );
                solver.sample_step = sample_step(p.period, p.samples_per_period)?;
                if p.stiff {
                    solver.ode = OdeOptions::stiff(solver.sample_step);
                }
                (heat_1d(&p)?, y0, p.horizon)
            }
            "wave_1d" => {
                let p: WaveParams = descriptor.params()?;
                let mut y0 = DVector::zeros(2 * p.n);
                for (i, &x) in interior_nodes(p.n, p.length).iter().enumerate() {
                    y0[i] = p.initial_state.eval(x, p.length);
                }
                solver.sample_step = sample_step(p.period, p.samples_per_period)?;
                (wave_1d(&p)?, y0, p.horizon)
            }
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown scenario {other:?}; expected one of {SCENARIO_NAMES:?}"
                )))
            }
        };
        if !(horizon > 0.0) {
            return Err(Error::InvalidScenario(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Scenario {
            descriptor: descriptor.clone(),
            problem,
            y0,
            horizon,
            solver,
        })
    }

    /// Default scenario by name.
    pub fn named(name: &str) -> Result<Self> {
        Self::from_descriptor(&ScenarioDescriptor::default_for(name)?)
    }
}

fn sample_step(period: f64, per_period: usize) -> Result<f64> {
    if per_period < 2 || !(period > 0.0) {
        return Err(Error::InvalidScenario("samples_per_period must be at least 2".into()));
    }
    Ok(period / per_period as f64)
}
