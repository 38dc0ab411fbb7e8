//! Turnpike of a semi-discretized heat equation with a destabilizing,
//! time-periodic reaction term and control on a sub-interval.
//!
//! cargo run --release --example heat_turnpike [-- n]

use periodic_turnpike::scenarios::{interior_nodes, Scenario, ScenarioDescriptor};
use periodic_turnpike::turnpike::{
    check_dissipation, default_window, deviation, fit_envelope, solve_finite_horizon, solve_periodic_orbit,
    DEFAULT_ENVELOPE_FLOOR,
};

fn main() -> periodic_turnpike::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let descriptor = ScenarioDescriptor::default_for("heat_1d")?.with("n", n.into());
    let sc = Scenario::from_descriptor(&descriptor)?;
    let horizon = sc.horizon;

    let periodic = solve_periodic_orbit(&sc.problem, &sc.solver)?;
    println!(
        "n = {n}, {} controls; periodic Riccati: {} sweeps, closed-loop decay rate {:.4}",
        sc.problem.control_dim(),
        periodic.riccati.sweeps,
        periodic.closed_loop().decay_rate
    );
    let finite = solve_finite_horizon(&sc.problem, &sc.y0, horizon, &sc.solver)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    for t in [0.0, 1.0, 2.0, 5.0, 8.0, 9.0, 10.0] {
        println!("  e({t:4.1}) = {:.3e}", e.eval(t)[0]);
    }
    println!("  e(T/2) / e(0) = {:.3e}", e.eval(horizon / 2.0)[0] / e.first()[0]);

    let window = default_window(periodic.closed_loop().decay_rate, sc.problem.period(), horizon);
    let fit = fit_envelope(&e, horizon, DEFAULT_ENVELOPE_FLOOR, window)?;
    println!("  fitted ν {:.3}, C {:.3}", fit.nu_fit, fit.c_fit);

    let r = check_dissipation(&sc.problem, &finite.triple.y, &finite.triple.u, &periodic, 0.0, horizon, &sc.solver)?;
    println!("  dissipation slack {:.4e} (passed: {})", r.slack, r.passed);

    // mid-horizon state profile against the periodic one
    let x = interior_nodes(n, 1.0);
    let (yt, yp) = (finite.triple.y.eval(horizon / 2.0), periodic.triple.y.eval_periodic(horizon / 2.0, 1.0));
    println!("     x      y^T(T/2)    y_θ(T/2)");
    for i in (0..n).step_by((n / 5).max(1)) {
        println!("  {:5.3}  {:10.6}  {:10.6}", x[i], yt[i], yp[i]);
    }
    Ok(())
}
