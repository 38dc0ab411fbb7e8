//! The storage/supply inequality `S(t0) + ∫ω ≥ S(t1)` along several
//! trajectories of the scalar example: the optimal one, the uncontrolled
//! one, and a few random smooth controls.

use nalgebra::DVector;
use periodic_turnpike::scenarios::scalar_example;
use periodic_turnpike::turnpike::{
    check_dissipation, simulate, solve_finite_horizon, solve_periodic_orbit, DissipationReport,
};
use periodic_turnpike::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn show(label: &str, r: &DissipationReport) {
    println!(
        "{label:>16}: S(t0) {:9.5}  ∫ω {:9.5}  S(t1) {:9.5}  slack {:10.3e}  (quadratic gap {:10.3e})  {}",
        r.storage_start,
        r.supply,
        r.storage_end,
        r.slack,
        r.quadratic_gap,
        if r.passed { "ok" } else { "VIOLATED" }
    );
}

fn main() -> periodic_turnpike::Result<()> {
    let (problem, y0) = scalar_example();
    let opts = SolverOptions::default();
    let periodic = solve_periodic_orbit(&problem, &opts)?;
    let theta = problem.period();

    let finite = solve_finite_horizon(&problem, &y0, 50.0, &opts)?;
    let r = check_dissipation(&problem, &finite.triple.y, &finite.triple.u, &periodic, 0.0, 50.0, &opts)?;
    show("optimal, T=50", &r);

    let zero = |_: f64| DVector::zeros(1);
    let (y, u) = simulate(&problem, &y0, &zero, 0.0, theta, &opts)?;
    show("zero control", &check_dissipation(&problem, &y, &u, &periodic, 0.0, theta, &opts)?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..3 {
        let coeffs: Vec<(f64, f64, f64)> = (1..=3)
            .map(|j| (rng.gen_range(-1.0..1.0), j as f64, rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let control = move |t: f64| {
            DVector::from_element(1, coeffs.iter().map(|(a, w, ph)| a * (w * t + ph).sin()).sum::<f64>())
        };
        let (y, u) = simulate(&problem, &y0, &control, 0.0, theta, &opts)?;
        let r = check_dissipation(&problem, &y, &u, &periodic, 0.0, theta, &opts)?;
        show(&format!("random #{k}"), &r);
    }
    Ok(())
}
