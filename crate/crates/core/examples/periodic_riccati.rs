//! Periodic Riccati solutions by backward period sweeps.
//!
//! For the scalar example the periodic solution is `2 + sin t`; for the
//! constant problem `A = -1`, `B = C = Q = 1` it is `√2 - 1`.

use nalgebra::{DMatrix, DVector};
use periodic_turnpike::riccati::{riccati_residual, solve_periodic_riccati, solve_riccati_terminal, RiccatiSummary};
use periodic_turnpike::scenarios::scalar_example;
use periodic_turnpike::{PeriodicLQProblem, SolverOptions};

fn main() -> periodic_turnpike::Result<()> {
    let opts = SolverOptions::default();
    let (problem, _) = scalar_example();
    let solved = solve_periodic_riccati(&problem, &opts)?;
    let worst = solved
        .path
        .grid()
        .iter()
        .zip(solved.path.values())
        .map(|(t, p)| (p[(0, 0)] - (2.0 + t.sin())).abs())
        .fold(0.0, f64::max);
    let summary = RiccatiSummary::new(&problem, &solved);
    println!("scalar example: {} sweeps, last gap {:.2e}", solved.sweeps, solved.gap);
    println!("  sup |P_θ - (2 + sin t)| = {worst:.3e}");
    println!("  residual {:.3e}, min eigenvalue {:.4}", summary.residual, summary.min_eigenvalue);

    // the finite-horizon solution settles onto P_θ away from the terminal time
    let horizon = 20.0;
    let finite = solve_riccati_terminal(&problem, horizon, &DMatrix::zeros(1, 1), &opts)?;
    for t in [0.0, 10.0, 15.0, 18.0, 19.5, 20.0] {
        println!(
            "  t = {t:5.1}: P^T = {:.10}, P_θ = {:.10}",
            finite.eval(t)[(0, 0)],
            solved.path.eval_periodic(t, problem.period())[(0, 0)]
        );
    }
    println!("  residual of P^T: {:.3e}", riccati_residual(&problem, &finite));

    let s = |v: f64| DMatrix::from_element(1, 1, v);
    let constant = PeriodicLQProblem::constant(s(-1.0), s(1.0), s(1.0), s(1.0), DVector::zeros(1), 1.0)?;
    let solved = solve_periodic_riccati(&constant, &opts)?;
    println!(
        "constant problem: P_θ = {:.12} (√2 - 1 = {:.12}), {} sweeps",
        solved.path.first()[(0, 0)],
        2f64.sqrt() - 1.0,
        solved.sweeps
    );
    Ok(())
}
