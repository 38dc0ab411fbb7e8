//! Cross-check of the Riccati synthesis against multiple shooting on the
//! optimality system, for a finite horizon and for the periodic problem.

use periodic_turnpike::scenarios::Scenario;
use periodic_turnpike::shooting::{solve_extremal_bvp, solve_periodic_bvp, ShootingConfig};
use periodic_turnpike::turnpike::{solve_finite_horizon, solve_periodic_orbit};

fn main() -> periodic_turnpike::Result<()> {
    let config = ShootingConfig::default();
    for name in ["scalar_example", "constant_test"] {
        let sc = Scenario::named(name)?;
        let horizon = 5.0;
        let riccati = solve_finite_horizon(&sc.problem, &sc.y0, horizon, &sc.solver)?;
        let shot = solve_extremal_bvp(&sc.problem, &sc.y0, horizon, &config)?;
        let (dy, du, dl) = riccati.triple.distance(&shot.triple)?;
        println!("{name}, T = {horizon}: {} Newton iterations", shot.iterations);
        println!("  residual history {:?}", shot.residual_history);
        println!("  sup distance  y {dy:.2e}  u {du:.2e}  λ {dl:.2e}");

        let periodic = solve_periodic_orbit(&sc.problem, &sc.solver)?;
        let shot = solve_periodic_bvp(&sc.problem, &config)?;
        let (dy, du, dl) = periodic.triple.distance(&shot.triple)?;
        println!("  periodic: sup distance  y {dy:.2e}  u {du:.2e}  λ {dl:.2e}");
    }
    Ok(())
}
