//! Behaviour of the semi-discretized heat and wave scenarios.

use periodic_turnpike::evolution::monodromy;
use periodic_turnpike::riccati::{closed_loop_monodromy, solve_periodic_riccati};
use periodic_turnpike::scenarios::{interior_nodes, Scenario, ScenarioDescriptor};
use serde_json::json;

fn heat(n: usize) -> Scenario {
    let d = ScenarioDescriptor::default_for("heat_1d").unwrap().with("n", n.into());
    Scenario::from_descriptor(&d).unwrap()
}

#[test]
fn heat_without_reaction_is_stable_and_converges() {
    let d = ScenarioDescriptor::default_for("heat_1d")
        .unwrap()
        .with("a_coeff", json!({"kind": "constant", "value": 0.0}));
    let sc = Scenario::from_descriptor(&d).unwrap();
    let a = |t: f64| sc.problem.a(t);
    assert!(monodromy(&a, sc.problem.state_dim(), 1.0, &sc.solver).unwrap().is_stable());
    let solved = solve_periodic_riccati(&sc.problem, &sc.solver).unwrap();
    assert!(solved.gap <= sc.solver.periodic_tol);
}

/// With a grid-weighted cost the discrete `P_θ` approximates `h` times the
/// kernel of the continuous operator, so `P_θ(0) / h` is compared at nodes
/// shared by the `n = 20` and `n = 41` grids.
#[test]
fn heat_riccati_converges_under_refinement() {
    let coarse = heat(20);
    let fine = heat(41);
    let pc = solve_periodic_riccati(&coarse.problem, &coarse.solver).unwrap().path.first().clone();
    let pf = solve_periodic_riccati(&fine.problem, &fine.solver).unwrap().path.first().clone();
    let (hc, hf) = (1.0 / 21.0, 1.0 / 42.0);
    let (xc, xf) = (interior_nodes(20, 1.0), interior_nodes(41, 1.0));
    assert!((xc[4] - xf[9]).abs() < 1e-12);
    let map = |i: usize| 2 * i + 1;
    let mut worst = 0.0f64;
    let scale = pc.amax() / hc;
    for i in 0..20 {
        for j in 0..20 {
            let (a, b) = (pc[(i, j)] / hc, pf[(map(i), map(j))] / hf);
            if a.abs() > 0.05 * scale {
                worst = worst.max((a - b).abs() / a.abs());
            }
        }
    }
    assert!(worst < 0.05, "largest relative change {worst}");
}

#[test]
fn damped_wave_riccati_converges() {
    let d = ScenarioDescriptor::default_for("wave_1d")
        .unwrap()
        .with("a_coeff", json!({"kind": "constant", "value": 1.0}));
    let sc = Scenario::from_descriptor(&d).unwrap();
    let solved = solve_periodic_riccati(&sc.problem, &sc.solver).unwrap();
    assert!(solved.gap <= sc.solver.periodic_tol);
    let closed = closed_loop_monodromy(&sc.problem, &solved.path, &sc.solver).unwrap();
    assert!(closed.is_stable());
}

#[test]
fn default_heat_needs_feedback() {
    let sc = heat(20);
    let a = |t: f64| sc.problem.a(t);
    assert!(!monodromy(&a, 20, 1.0, &sc.solver).unwrap().is_stable());
    let solved = solve_periodic_riccati(&sc.problem, &sc.solver).unwrap();
    assert!(closed_loop_monodromy(&sc.problem, &solved.path, &sc.solver).unwrap().is_stable());
}
