//! Structural invariants of the Riccati, evolution and synthesis layers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use periodic_turnpike::evolution::transition_matrix;
use periodic_turnpike::problem::evaluate_cost;
use periodic_turnpike::riccati::{solve_periodic_riccati, solve_riccati_terminal};
use periodic_turnpike::scenarios::scalar_example;
use periodic_turnpike::turnpike::{
    adjoint_residual, layer_deviation, simulate, solve_finite_horizon, solve_periodic_orbit,
};
use periodic_turnpike::{PeriodicLQProblem, SolverOptions};
use proptest::prelude::*;

fn matrix2(v: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &v)
}

/// Two-state problem with a periodic drift and a single input.
fn oscillator(a: [f64; 4], eps: f64, b: [f64; 2], c: f64) -> PeriodicLQProblem {
    let base = matrix2(a);
    PeriodicLQProblem::builder(2, 1, 1.0)
        .q_floor(0.5)
        .a(move |t| &base + DMatrix::identity(2, 2) * eps * (2.0 * PI * t).sin())
        .b(move |_| DMatrix::from_column_slice(2, 1, &b))
        .c(move |_| DMatrix::identity(2, 2) * c)
        .q(|_| DMatrix::from_element(1, 1, 0.5))
        .y_d(|t| DVector::from_vec(vec![(2.0 * PI * t).cos(), 0.0]))
        .build()
        .unwrap()
}

fn arb_problem() -> impl Strategy<Value = PeriodicLQProblem> {
    (
        prop::array::uniform4(-1.0..1.0f64),
        0.0..0.5f64,
        prop::array::uniform2(0.2..1.0f64),
        0.5..2.0f64,
    )
        .prop_map(|(a, eps, b, c)| oscillator(a, eps, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn riccati_paths_are_symmetric_and_psd(problem in arb_problem(), horizon in 0.5..4.0f64) {
        let opts = SolverOptions::default();
        let p = solve_riccati_terminal(&problem, horizon, &DMatrix::zeros(2, 2), &opts).unwrap();
        prop_assert!(p.max_symmetry_defect() <= 1e-12);
        prop_assert!(p.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn longer_horizons_dominate(problem in arb_problem(), t1 in 0.5..2.0f64, extra in 0.1..2.0f64) {
        let opts = SolverOptions::default();
        let zero = DMatrix::zeros(2, 2);
        let short = solve_riccati_terminal(&problem, t1, &zero, &opts).unwrap();
        let long = solve_riccati_terminal(&problem, t1 + extra, &zero, &opts).unwrap();
        let scale = long.values().iter().map(|p| p.norm()).fold(1.0, f64::max);
        for (t, p) in short.grid().iter().zip(short.values()) {
            let d = long.eval(*t) - p;
            prop_assert!(d.symmetric_eigenvalues().min() >= -10.0 * opts.ode.rtol * scale);
        }
    }

    #[test]
    fn evolution_composes(problem in arb_problem(), t0 in 0.0..1.0f64, s in 0.0..1.0f64, len in 0.1..3.0f64) {
        let opts = SolverOptions::default();
        let a = |t: f64| problem.a(t);
        let (r, t1) = (t0 + s * len, t0 + len);
        let whole = transition_matrix(&a, 2, t0, t1, &opts.ode).unwrap();
        let split = transition_matrix(&a, 2, r, t1, &opts.ode).unwrap() * transition_matrix(&a, 2, t0, r, &opts.ode).unwrap();
        prop_assert!((&whole - split).norm() <= 10.0 * (opts.ode.rtol + opts.ode.atol) * whole.norm().max(1.0));
    }

    #[test]
    fn finite_triple_meets_boundary_and_control_laws(y0 in -2.0..2.0f64, horizon in 1.0..8.0f64) {
        let (problem, _) = scalar_example();
        let opts = SolverOptions::default();
        let y0 = DVector::from_element(1, y0);
        let f = solve_finite_horizon(&problem, &y0, horizon, &opts).unwrap();
        prop_assert!((f.triple.y.first() - &y0).norm() == 0.0);
        prop_assert!(f.triple.lambda.last().norm() <= 1e-9);
        prop_assert!(f.triple.control_defect(&problem) <= 1e-9);
        let magnitude = 1.0 + f.triple.y.sup_norm() + f.triple.lambda.sup_norm();
        prop_assert!(adjoint_residual(&problem, &f.triple.y, &f.triple.lambda).unwrap() <= 1e-6 * magnitude);
    }

    #[test]
    fn cost_is_nonnegative(amp in -3.0..3.0f64, freq in 0.0..5.0f64, shift in -2.0..2.0f64) {
        let (problem, _) = scalar_example();
        let grid: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
        let y = periodic_turnpike::VectorPath::scalar(grid.clone(), &grid.iter().map(|t| amp * (freq * t).sin() + shift).collect::<Vec<_>>()).unwrap();
        let u = periodic_turnpike::VectorPath::scalar(grid.clone(), &grid.iter().map(|t| amp * (freq * t).cos()).collect::<Vec<_>>()).unwrap();
        prop_assert!(evaluate_cost(&problem, &y, &u, 0.0, 3.0).unwrap() >= 0.0);
    }
}

#[test]
fn periodic_outputs_close_up() {
    let opts = SolverOptions::default();
    for problem in [scalar_example().0, oscillator([0.0, 1.0, -1.0, -0.1], 0.3, [0.0, 1.0], 1.0)] {
        let orbit = solve_periodic_orbit(&problem, &opts).unwrap();
        assert!((orbit.p().last() - orbit.p().first()).norm() <= opts.periodic_tol);
        assert!((orbit.r().last() - orbit.r().first()).norm() <= opts.periodic_tol);
        assert!(orbit.triple.periodicity_defect() <= opts.periodic_tol);
        assert!(orbit.triple.control_defect(&problem) <= 1e-9);
    }
}

#[test]
fn periodic_riccati_reproduces_itself_over_one_more_period() {
    let opts = SolverOptions::default();
    let (problem, _) = scalar_example();
    let solved = solve_periodic_riccati(&problem, &opts).unwrap();
    let again = solve_riccati_terminal(&problem, problem.period(), solved.path.first(), &opts).unwrap();
    let gap = again
        .grid()
        .iter()
        .zip(again.values())
        .map(|(t, p)| (p - solved.path.eval(*t)).norm())
        .fold(0.0, f64::max);
    assert!(gap <= 10.0 * opts.periodic_tol, "gap {gap:e}");
}

/// Synthesized control against smooth bump perturbations, every cost from
/// simulating the true dynamics on the same grid.
#[test]
fn synthesized_control_beats_perturbations() {
    let (problem, y0) = scalar_example();
    let opts = SolverOptions {
        sample_step: 0.0025,
        ..SolverOptions::default()
    };
    let horizon = 5.0;
    let f = solve_finite_horizon(&problem, &y0, horizon, &opts).unwrap();
    let u_star = f.triple.u.clone();
    let cost_of = |delta: f64, center: f64| {
        let u_star = u_star.clone();
        let control = move |t: f64| {
            let s = (t - center) / 1.0;
            let phi = if s.abs() < 1.0 { (1.0 - s * s).powi(3) } else { 0.0 };
            u_star.eval(t) + DVector::from_element(1, delta * phi)
        };
        let (y, u) = simulate(&problem, &y0, &control, 0.0, horizon, &opts).unwrap();
        evaluate_cost(&problem, &y, &u, 0.0, horizon).unwrap()
    };
    let base = cost_of(0.0, 0.0);
    let mut count = 0;
    for center in [1.5, 3.5] {
        for delta in [1e-2, -1e-2, 1e-3, -1e-3] {
            assert!(cost_of(delta, center) >= base, "δ = {delta}, center {center}");
            count += 1;
        }
    }
    for delta in [1e-2, -1e-2] {
        assert!(cost_of(delta, 2.5) >= base);
        count += 1;
    }
    assert_eq!(count, 10);
}

/// Early-time deviation is proportional to the initial offset from the
/// periodic orbit.
#[test]
fn initial_layer_scales_with_offset() {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let problem = PeriodicLQProblem::constant(s(-1.0), s(1.0), s(1.0), s(1.0), DVector::from_element(1, 1.0), 1.0).unwrap();
    let opts = SolverOptions::default();
    let orbit = solve_periodic_orbit(&problem, &opts).unwrap();
    let y_theta = orbit.triple.y.first()[0];
    let horizon = 12.0;
    let (ya, yb) = (DVector::from_element(1, 2.0), DVector::from_element(1, -0.5));
    let ea = layer_deviation(&problem, &solve_finite_horizon(&problem, &ya, horizon, &opts).unwrap(), &orbit, &opts).unwrap();
    let eb = layer_deviation(&problem, &solve_finite_horizon(&problem, &yb, horizon, &opts).unwrap(), &orbit, &opts).unwrap();
    let expected = (y_theta - ya[0]).abs() / (y_theta - yb[0]).abs();
    for t in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let ratio = ea.e.eval(t)[0] / eb.e.eval(t)[0];
        assert!((ratio / expected - 1.0).abs() <= 0.2, "t = {t}: {ratio} vs {expected}");
    }
}

/// With `F_θ ≡ -2`, `r_θ(t) = -∫_t^∞ e^{-2(s-t)} C^2(s) y_d(s) ds`.
#[test]
fn scalar_offset_matches_truncated_integral() {
    let (problem, _) = scalar_example();
    let opts = SolverOptions::default();
    let orbit = solve_periodic_orbit(&problem, &opts).unwrap();
    let integrand = |t: f64, s: f64| (-2.0 * (s - t)).exp() * (4.0 - s.sin().powi(2) - s.cos()) * s.cos();
    for t in [0.0, 1.0, 2.5, 4.0, 6.0] {
        // composite Simpson on [t, t + 20]
        let n = 4000;
        let h = 20.0 / n as f64;
        let mut acc = integrand(t, t) + integrand(t, t + 20.0);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(t, t + k as f64 * h);
        }
        let oracle = -acc * h / 3.0;
        let r = orbit.r().eval_periodic(t, problem.period())[0];
        assert!((r - oracle).abs() <= 1e-7, "t = {t}: {r} vs {oracle}");
    }
}
