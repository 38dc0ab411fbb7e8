//! Initial value integrators.
//!
//! Two methods are available: the Dormand–Prince 5(4) pair with adaptive
//! steps and its fourth-order continuous extension for output between
//! steps, and a fixed-step implicit midpoint rule (simplified Newton with a
//! reused factorization) for stiff semi-discretized PDEs.
//!
//! Integration may run forward or backward in time. Samples are returned at
//! caller-chosen output times together with the right-hand side evaluated
//! there, which gives exact Hermite slopes for [`crate::path::Path`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order system `x' = f(t, x)`.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;

    /// Jacobian `df/dx`, by forward differences unless overridden.
    fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let f0 = self.rhs(t, x);
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            let h = 1e-7 * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            let fj = self.rhs(t, &xp);
            jac.set_column(j, &((fj - &f0) / h));
            xp[j] = x[j];
        }
        jac
    }

    /// Applied to every accepted state (e.g. symmetrization).
    fn project(&self, _x: &mut DVector<f64>) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    DormandPrince,
    /// Fixed-step implicit midpoint with steps no longer than `max_step`.
    ImplicitMidpoint { max_step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            method: Method::DormandPrince,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn stiff(max_step: f64) -> Self {
        OdeOptions {
            method: Method::ImplicitMidpoint { max_step },
            ..Default::default()
        }
    }
}

/// Output of [`integrate`]: states and right-hand sides at the output times.
#[derive(Clone, Debug)]
pub struct Samples {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub slopes: Vec<DVector<f64>>,
}

/// Integrates from `(t0, x0)` towards `t1`, sampling at `outputs`.
///
/// `outputs` must lie in the closed interval between `t0` and `t1` and be
/// ordered in the direction of integration. Integration stops at the last
/// output time.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    t1: f64,
    x0: &DVector<f64>,
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<Samples> {
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {} but the system has dimension {}",
            x0.len(),
            sys.dim()
        )));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let slack = 1e-12 * (1.0 + t0.abs().max(t1.abs()));
    for w in outputs.windows(2) {
        if (w[1] - w[0]) * dir < 0.0 {
            return Err(Error::GridMismatch("output times out of order".into()));
        }
    }
    if outputs
        .iter()
        .any(|&s| (s - t0) * dir < -slack || (s - t0) * dir > span + slack)
    {
        return Err(Error::GridMismatch("output time outside the integration span".into()));
    }
    let mut x = x0.clone();
    sys.project(&mut x);
    let mut out = Samples {
        times: Vec::with_capacity(outputs.len()),
        states: Vec::with_capacity(outputs.len()),
        slopes: Vec::with_capacity(outputs.len()),
    };
    let Some(&t_stop) = outputs.last() else {
        return Ok(out);
    };
    match opts.method {
        Method::DormandPrince => dopri5(sys, t0, t_stop, x, outputs, opts, &mut out)?,
        Method::ImplicitMidpoint { max_step } => {
            midpoint(sys, t0, x, outputs, max_step, opts, &mut out)?
        }
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension (Hairer & Wanner, dense output of DOPRI5)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn lin(terms: &[(f64, &DVector<f64>)], base: &DVector<f64>) -> DVector<f64> {
    let mut out = base.clone();
    for (c, v) in terms {
        if *c != 0.0 {
            out.axpy(*c, *v, 1.0);
        }
    }
    out
}

fn error_norm(err: &DVector<f64>, x: &DVector<f64>, xn: &DVector<f64>, o: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(x.iter().zip(xn.iter()))
        .map(|(e, (a, b))| {
            let sc = o.atol + o.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    x0: &DVector<f64>,
    f0: &DVector<f64>,
    dir: f64,
    span: f64,
    o: &OdeOptions,
) -> f64 {
    let scale = |v: &DVector<f64>| {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(x0.iter())
            .map(|(a, x)| (a / (o.atol + o.rtol * x.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(x0);
    let d1 = scale(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let x1 = lin(&[(dir * h0, f0)], x0);
    let f1 = sys.rhs(t0 + dir * h0, &x1);
    let d2 = scale(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(1e-12 * span)
}

#[allow(clippy::too_many_arguments)]
fn dopri5<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    t_end: f64,
    mut x: DVector<f64>,
    outputs: &[f64],
    o: &OdeOptions,
    out: &mut Samples,
) -> Result<()> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut next = 0;
    // outputs at the starting time
    while next < outputs.len() && (outputs[next] - t0).abs() <= 1e-14 * (1.0 + t0.abs()) {
        push(sys, out, outputs[next], x.clone());
        next += 1;
    }
    if next == outputs.len() {
        return Ok(());
    }
    let mut k1 = sys.rhs(t, &x);
    let mut h = initial_step(sys, t, &x, &k1, dir, span, o);
    let mut steps = 0usize;
    let mut last_reject = false;
    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        steps += 1;
        if steps > o.max_steps {
            return Err(Error::StepLimit { t, steps });
        }
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::Stiffness { t, h });
        }
        let hs = h * dir;
        let k2 = sys.rhs(t + C2 * hs, &lin(&[(hs * A21, &k1)], &x));
        let k3 = sys.rhs(t + C3 * hs, &lin(&[(hs * A31, &k1), (hs * A32, &k2)], &x));
        let k4 = sys.rhs(
            t + C4 * hs,
            &lin(&[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)], &x),
        );
        let k5 = sys.rhs(
            t + C5 * hs,
            &lin(
                &[(hs * A51, &k1), (hs * A52, &k2), (hs * A53, &k3), (hs * A54, &k4)],
                &x,
            ),
        );
        let x6 = lin(
            &[
                (hs * A61, &k1),
                (hs * A62, &k2),
                (hs * A63, &k3),
                (hs * A64, &k4),
                (hs * A65, &k5),
            ],
            &x,
        );
        let t_new = if last { t_end } else { t + hs };
        let k6 = sys.rhs(t + hs, &x6);
        let xn = lin(
            &[
                (hs * A71, &k1),
                (hs * A73, &k3),
                (hs * A74, &k4),
                (hs * A75, &k5),
                (hs * A76, &k6),
            ],
            &x,
        );
        let k7 = sys.rhs(t_new, &xn);
        let err_vec = lin(
            &[
                (hs * E1, &k1),
                (hs * E3, &k3),
                (hs * E4, &k4),
                (hs * E5, &k5),
                (hs * E6, &k6),
                (hs * E7, &k7),
            ],
            &DVector::zeros(x.len()),
        );
        let err = error_norm(&err_vec, &x, &xn, o);
        if !err.is_finite() {
            h *= 0.1;
            last_reject = true;
            continue;
        }
        if err <= 1.0 {
            // dense output for every output time inside (t, t_new]
            while next < outputs.len() && (outputs[next] - t_new) * dir <= 1e-14 * (1.0 + t_new.abs())
            {
                let s = outputs[next];
                let state = if last && next == outputs.len() - 1 || s == t_new {
                    xn.clone()
                } else {
                    let theta = ((s - t) / hs).clamp(0.0, 1.0);
                    let r2 = &xn - &x;
                    let r3 = &k1 * hs - &r2;
                    let r4 = &r2 - &k7 * hs - &r3;
                    let r5 = lin(
                        &[
                            (hs * D1, &k1),
                            (hs * D3, &k3),
                            (hs * D4, &k4),
                            (hs * D5, &k5),
                            (hs * D6, &k6),
                            (hs * D7, &k7),
                        ],
                        &DVector::zeros(x.len()),
                    );
                    let eta = 1.0 - theta;
                    &x + (r2 + (r3 + (r4 + r5 * eta) * theta) * eta) * theta
                };
                push(sys, out, s, state);
                next += 1;
            }
            t = t_new;
            x = xn;
            sys.project(&mut x);
            k1 = k7;
            if next == outputs.len() {
                break;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_reject {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_reject = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_reject = true;
        }
    }
    Ok(())
}

fn push<S: OdeSystem + ?Sized>(sys: &S, out: &mut Samples, t: f64, mut x: DVector<f64>) {
    sys.project(&mut x);
    let f = sys.rhs(t, &x);
    out.times.push(t);
    out.states.push(x);
    out.slopes.push(f);
}

struct Factor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    h: f64,
}

fn midpoint<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    mut x: DVector<f64>,
    outputs: &[f64],
    max_step: f64,
    o: &OdeOptions,
    out: &mut Samples,
) -> Result<()> {
    if !(max_step > 0.0) {
        return Err(Error::InvalidProblem("implicit midpoint step must be positive".into()));
    }
    let n = x.len();
    let mut t = t0;
    let mut factor: Option<Factor> = None;
    let mut steps = 0usize;
    for &target in outputs {
        let gap = target - t;
        if gap.abs() > 1e-14 * (1.0 + t.abs()) {
            let m = (gap.abs() / max_step - 1e-9).ceil().max(1.0) as usize;
            let h = gap / m as f64;
            for i in 0..m {
                steps += 1;
                if steps > o.max_steps {
                    return Err(Error::StepLimit { t, steps });
                }
                let tm = t + 0.5 * h;
                // predictor: explicit midpoint value
                let f0 = sys.rhs(tm, &x);
                let mut xn = &x + &f0 * h;
                let mut converged = false;
                for attempt in 0..2 {
                    let stale = factor.as_ref().is_none_or(|f| (f.h - h).abs() > 1e-12 * h.abs());
                    if stale || attempt == 1 {
                        let jac = sys.jacobian(tm, &((&x + &xn) * 0.5));
                        let mat = DMatrix::identity(n, n) - jac * (0.5 * h);
                        factor = Some(Factor { lu: mat.lu(), h });
                    }
                    let lu = &factor.as_ref().unwrap().lu;
                    let mut prev = f64::INFINITY;
                    for _ in 0..12 {
                        let mid = (&x + &xn) * 0.5;
                        let g = &xn - &x - sys.rhs(tm, &mid) * h;
                        let Some(delta) = lu.solve(&g) else {
                            break;
                        };
                        xn -= &delta;
                        let size = delta.amax();
                        let magnitude = xn.amax();
                        if size <= 1e-13 * magnitude + 1e-3 * o.atol {
                            converged = true;
                            break;
                        }
                        if size > 0.5 * prev {
                            // stagnation at roundoff level counts as converged
                            if size <= 1e-10 * magnitude + o.atol {
                                converged = true;
                            }
                            // otherwise contraction is too slow: refresh the factorization
                            break;
                        }
                        prev = size;
                    }
                    if converged {
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NewtonFailure { t });
                }
                t = if i + 1 == m { target } else { t + h };
                x = xn;
                sys.project(&mut x);
            }
        }
        t = target;
        push(sys, out, target, x.clone());
    }
    Ok(())
}
