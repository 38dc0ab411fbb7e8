//! Periodic Riccati feedback for a damped wave equation written as a
//! first-order system in (displacement, velocity), with the velocity both
//! actuated and observed.

use periodic_turnpike::scenarios::Scenario;
use periodic_turnpike::turnpike::{deviation, solve_finite_horizon, solve_periodic_orbit};

fn main() -> periodic_turnpike::Result<()> {
    let sc = Scenario::named("wave_1d")?;
    let p = &sc.problem;
    let b = p.b(0.0);
    println!(
        "state dim {}, control dim {}, B Bᵀ = C: {}",
        p.state_dim(),
        p.control_dim(),
        &b * b.transpose() == p.c(0.0)
    );
    let periodic = solve_periodic_orbit(p, &sc.solver)?;
    let pt = periodic.p().first();
    println!(
        "periodic Riccati: {} sweeps, min eigenvalue {:.3e}, |P_θ(0)| {:.4}",
        periodic.riccati.sweeps,
        periodic.p().min_eigenvalue(),
        pt.norm()
    );
    println!("closed-loop decay rate {:.4}", periodic.closed_loop().decay_rate);

    let finite = solve_finite_horizon(p, &sc.y0, sc.horizon, &sc.solver)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    for t in [0.0, 2.5, 5.0, 7.5, 10.0] {
        println!("  e({t:4.1}) = {:.4e}", e.eval(t)[0]);
    }
    Ok(())
}
