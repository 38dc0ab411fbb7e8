//! Building a problem directly from coefficient closures: a lightly damped
//! oscillator with a periodically varying stiffness, tracking a periodic
//! position target through a single force input.

use nalgebra::{DMatrix, DVector};
use periodic_turnpike::turnpike::{deviation, solve_finite_horizon, solve_periodic_orbit};
use periodic_turnpike::{PeriodicLQProblem, SolverOptions};
use std::f64::consts::PI;

fn main() -> periodic_turnpike::Result<()> {
    let period = 2.0;
    let problem = PeriodicLQProblem::builder(2, 1, period)
        .q_floor(0.1)
        .a(move |t| {
            let k = 1.0 + 0.5 * (2.0 * PI * t / period).cos();
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -k, -0.05])
        })
        .b(|_| DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))
        .c(|_| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])))
        .q(|_| DMatrix::from_element(1, 1, 0.1))
        .y_d(move |t| DVector::from_vec(vec![(2.0 * PI * t / period).sin(), 0.0]))
        .build()?;
    let report = problem.validate(128)?;
    println!("validation passed: {}", report.passed);

    let opts = SolverOptions::default();
    let periodic = solve_periodic_orbit(&problem, &opts)?;
    println!(
        "periodic orbit: cost per period {:.5}, closed-loop decay rate {:.4}",
        periodic.triple.cost,
        periodic.closed_loop().decay_rate
    );
    let finite = solve_finite_horizon(&problem, &DVector::from_vec(vec![1.0, 0.0]), 20.0, &opts)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    for t in [0.0, 2.0, 5.0, 10.0, 15.0, 18.0, 20.0] {
        println!("  e({t:4.1}) = {:.3e}", e.eval(t)[0]);
    }
    Ok(())
}
