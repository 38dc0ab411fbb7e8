//! Long-horizon optimum of the scalar example against its periodic turnpike.
//!
//! Prints `y`, `u`, `λ` for both solutions at a few times, the deviation
//! `e(t)`, and the fitted envelope `C (e^{-νt} + e^{-ν(T-t)})`.
//!
//! cargo run --release --example scalar_turnpike [-- T]

use periodic_turnpike::scenarios::scalar_example;
use periodic_turnpike::turnpike::{
    default_window, deviation, fit_envelope, layer_deviation, solve_finite_horizon, solve_periodic_orbit,
    DEFAULT_ENVELOPE_FLOOR,
};
use periodic_turnpike::SolverOptions;

fn main() -> periodic_turnpike::Result<()> {
    let horizon: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50.0);
    let (problem, y0) = scalar_example();
    let opts = SolverOptions::default();

    let periodic = solve_periodic_orbit(&problem, &opts)?;
    let finite = solve_finite_horizon(&problem, &y0, horizon, &opts)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    let layers = layer_deviation(&problem, &finite, &periodic, &opts)?;

    let theta = problem.period();
    println!("     t        y^T        y_θ        u^T        u_θ      λ^T      λ_θ        e(t)");
    for k in 0..=10 {
        let t = horizon * k as f64 / 10.0;
        let (f, p) = (&finite.triple, &periodic.triple);
        println!(
            "{t:6.1} {:10.6} {:10.6} {:10.6} {:10.6} {:8.4} {:8.4} {:11.3e}",
            f.y.eval(t)[0],
            p.y.eval_periodic(t, theta)[0],
            f.u.eval(t)[0],
            p.u.eval_periodic(t, theta)[0],
            f.lambda.eval(t)[0],
            p.lambda.eval_periodic(t, theta)[0],
            layers.e.eval(t)[0],
        );
    }

    let rho = periodic.closed_loop().decay_rate;
    let window = default_window(rho, theta, horizon);
    let fit = fit_envelope(&e, horizon, DEFAULT_ENVELOPE_FLOOR, window)?;
    println!();
    println!("closed-loop decay rate ρ     {rho:.6}");
    println!("fitted ν (initial / final)   {:.4} ({:?} / {:?})", fit.nu_fit, fit.nu_initial, fit.nu_final);
    println!("fitted C                     {:.4}", fit.c_fit);
    println!("e(T/2) direct / layers       {:.3e} / {:.3e}", e.eval(horizon / 2.0)[0], layers.e.eval(horizon / 2.0)[0]);
    println!("cost (finite horizon)        {:.6}", finite.triple.cost);
    Ok(())
}
