//! Floquet analysis of open and closed loops.
//!
//! The open-loop scalar example has multiplier 1 (`∫ sin = 0` over a
//! period); feedback with `P_θ = 2 + sin t` makes the closed loop `-2`. The
//! heat scenario's destabilizing reaction term gives an unstable open loop
//! that the Riccati feedback stabilizes.

use periodic_turnpike::evolution::monodromy;
use periodic_turnpike::riccati::{closed_loop_monodromy, solve_periodic_riccati};
use periodic_turnpike::scenarios::Scenario;

fn main() -> periodic_turnpike::Result<()> {
    for name in ["scalar_example", "heat_1d", "wave_1d"] {
        let sc = Scenario::named(name)?;
        let p = &sc.problem;
        let a = |t: f64| p.a(t);
        let open = monodromy(&a, p.state_dim(), p.period(), &sc.solver)?;
        let riccati = solve_periodic_riccati(p, &sc.solver)?;
        let closed = closed_loop_monodromy(p, &riccati.path, &sc.solver)?;
        println!("{name} (state dim {}, period {:.4})", p.state_dim(), p.period());
        println!(
            "  open loop:   spectral radius {:11.4e}, decay rate {:8.4}, stable {}",
            open.spectral_radius,
            open.decay_rate,
            open.is_stable()
        );
        println!(
            "  closed loop: spectral radius {:11.4e}, decay rate {:8.4}, stable {}",
            closed.spectral_radius,
            closed.decay_rate,
            closed.is_stable()
        );
        let mut mods: Vec<f64> = closed.multipliers.iter().map(|(re, im)| re.hypot(*im)).collect();
        mods.sort_by(|a, b| b.total_cmp(a));
        mods.truncate(3);
        let mods: Vec<String> = mods.iter().map(|m| format!("{m:.4e}")).collect();
        println!("  largest closed-loop multipliers {}", mods.join(", "));
    }
    Ok(())
}
