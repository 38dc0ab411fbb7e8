//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process exits nonzero if any criterion fails other than those listed in
//! `KNOWN_FAILURES`, or if one of those unexpectedly passes.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use periodic_turnpike::cli::{cmd_sweep, Overrides};
use periodic_turnpike::evolution::{monodromy, transition_matrix};
use periodic_turnpike::riccati::{closed_loop_monodromy, solve_periodic_riccati, solve_riccati_terminal};
use periodic_turnpike::scenarios::{scalar_example, Scenario, ScenarioDescriptor};
use periodic_turnpike::shooting::{solve_extremal_bvp, ShootingConfig};
use periodic_turnpike::turnpike::{
    check_dissipation, default_window, deviation, fit_envelope, riccati_gap_profile, simulate,
    solve_finite_horizon, solve_periodic_orbit, DEFAULT_ENVELOPE_FLOOR, DEFAULT_GAP_FLOOR,
};
use periodic_turnpike::{Result, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C1_TOL: f64 = 1e-8;
const C1_TIME: Duration = Duration::from_secs(5);
const C2_RATE: f64 = 2.0;
const C2_TOL: f64 = 1e-6;
const C3_NU: (f64, f64) = (1.7, 2.3);
const C3_MID: f64 = 1e-6;
const C3_TIME: Duration = Duration::from_secs(30);
const C4_MU: (f64, f64) = (3.4, 4.6);
const C5_TOL: f64 = 1e-5;
const C6_P_TOL: f64 = 1e-9;
const C6_YR_TOL: f64 = 1e-8;
const C7_RANDOM_CONTROLS: usize = 5;
const C8_SYMMETRY: f64 = 1e-12;
const C8_PSD: f64 = -1e-10;
const C8_COMPOSITION_FACTOR: f64 = 10.0;
const C8_BOUNDARY: f64 = 1e-9;
const C8_CONTROL: f64 = 1e-9;
const C9_MAX_SWEEPS: usize = 60;
const C9_RATIO: f64 = 1e-3;
const C9_TIME: Duration = Duration::from_secs(180);
const C10_SPREAD: f64 = 0.15;
const C10_SLOPE_REL: f64 = 0.15;

/// Criteria that fail as stated. `10b` asks for slope `-ν`, but the envelope
/// gives `e(T/2) = 2C e^{-νT/2}`, i.e. slope `-ν/2` (printed as INFO).
const KNOWN_FAILURES: [&str; 1] = ["10b"];

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} {id:<4} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id.to_string());
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("INFO {id:<4} {detail}");
    }

    fn guard(&mut self, id: &str, r: Result<()>) {
        if let Err(e) = r {
            self.line(id, false, format!("error: {e}"));
        }
    }
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn c1_c2(rep: &mut Report) -> Result<()> {
    let (problem, _) = scalar_example();
    let opts = SolverOptions::default();
    let start = Instant::now();
    let solved = solve_periodic_riccati(&problem, &opts)?;
    let elapsed = start.elapsed();
    let err = solved
        .path
        .grid()
        .iter()
        .zip(solved.path.values())
        .map(|(t, p)| (p[(0, 0)] - (2.0 + t.sin())).abs())
        .fold(0.0, f64::max);
    rep.line(
        "1",
        err <= C1_TOL && elapsed <= C1_TIME,
        format!("sup|P_θ - (2+sin t)| = {err:.3e} (≤ {C1_TOL:e}), {:.3}s (≤ {}s)", elapsed.as_secs_f64(), C1_TIME.as_secs()),
    );
    let report = closed_loop_monodromy(&problem, &solved.path, &opts)?;
    let dev = (report.decay_rate - C2_RATE).abs();
    rep.line(
        "2",
        dev <= C2_TOL,
        format!("closed-loop decay rate {:.10} (|· - 2| = {dev:.2e} ≤ {C2_TOL:e})", report.decay_rate),
    );
    Ok(())
}

fn c3_c4(rep: &mut Report) -> Result<()> {
    let (problem, y0) = scalar_example();
    let opts = SolverOptions::default();
    let horizon = 50.0;
    let start = Instant::now();
    let periodic = solve_periodic_orbit(&problem, &opts)?;
    let finite = solve_finite_horizon(&problem, &y0, horizon, &opts)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    let rho = periodic.closed_loop().decay_rate;
    let fit = fit_envelope(&e, horizon, DEFAULT_ENVELOPE_FLOOR, default_window(rho, problem.period(), horizon))?;
    let elapsed = start.elapsed();
    let mid = e.eval(horizon / 2.0)[0];
    rep.line(
        "3",
        within(fit.nu_fit, C3_NU) && mid <= C3_MID && elapsed <= C3_TIME,
        format!(
            "nu_fit {:.4} ∈ {C3_NU:?}, e(25) = {mid:.3e} (≤ {C3_MID:e}), {:.2}s (≤ {}s)",
            fit.nu_fit,
            elapsed.as_secs_f64(),
            C3_TIME.as_secs()
        ),
    );
    let narrow = fit_envelope(&e, horizon, DEFAULT_ENVELOPE_FLOOR, (3.0 / rho).min(horizon / 4.0))?;
    rep.info("3", format!("nu_fit with window min(3/ρ, T/4): {:.4}", narrow.nu_fit));

    let gap = riccati_gap_profile(&finite.p, periodic.p(), horizon, problem.period(), rho, DEFAULT_GAP_FLOOR)?;
    rep.line(
        "4",
        within(gap.mu_fit, C4_MU),
        format!("mu_fit {:.4} ∈ {C4_MU:?} (2ρ = {:.4}, {} points)", gap.mu_fit, 2.0 * rho, gap.points),
    );
    Ok(())
}

fn c5(rep: &mut Report) -> Result<()> {
    let config = ShootingConfig::default();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for name in ["scalar_example", "constant_test"] {
        let sc = Scenario::named(name)?;
        let synth = solve_finite_horizon(&sc.problem, &sc.y0, 5.0, &sc.solver)?;
        let shot = solve_extremal_bvp(&sc.problem, &sc.y0, 5.0, &config)?;
        let (dy, du, dl) = synth.triple.distance(&shot.triple)?;
        worst = worst.max(dy).max(du).max(dl);
        parts.push(format!("{name}: y {dy:.1e} u {du:.1e} λ {dl:.1e}"));
    }
    rep.line("5", worst <= C5_TOL, format!("{} (≤ {C5_TOL:e})", parts.join("; ")));
    Ok(())
}

fn c6(rep: &mut Report) -> Result<()> {
    let sc = Scenario::named("constant_test")?;
    let orbit = solve_periodic_orbit(&sc.problem, &sc.solver)?;
    let sup = |vals: Vec<f64>, exact: f64| vals.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max);
    let dp = sup(orbit.p().values().iter().map(|m| m[(0, 0)]).collect(), 2f64.sqrt() - 1.0);
    let dy = sup(orbit.triple.y.component(0), 0.5);
    let dr = sup(orbit.r().component(0), -1.0 / 2f64.sqrt());
    rep.line(
        "6",
        dp <= C6_P_TOL && dy <= C6_YR_TOL && dr <= C6_YR_TOL,
        format!("|P-(√2-1)| {dp:.2e} (≤ {C6_P_TOL:e}), |y-1/2| {dy:.2e}, |r+1/√2| {dr:.2e} (≤ {C6_YR_TOL:e})"),
    );
    Ok(())
}

fn c7(rep: &mut Report) -> Result<()> {
    let (problem, y0) = scalar_example();
    let opts = SolverOptions::default();
    let periodic = solve_periodic_orbit(&problem, &opts)?;
    let theta = problem.period();
    let finite = solve_finite_horizon(&problem, &y0, 50.0, &opts)?;
    let mut reports = vec![(
        "optimal".to_string(),
        check_dissipation(&problem, &finite.triple.y, &finite.triple.u, &periodic, 0.0, 50.0, &opts)?,
    )];
    let zero = |_: f64| DVector::zeros(1);
    let (y, u) = simulate(&problem, &y0, &zero, 0.0, theta, &opts)?;
    reports.push(("zero".into(), check_dissipation(&problem, &y, &u, &periodic, 0.0, theta, &opts)?));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..C7_RANDOM_CONTROLS {
        let modes: Vec<(f64, f64)> = (1..=4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))).collect();
        let control = move |t: f64| {
            let v: f64 = modes.iter().enumerate().map(|(j, (a, ph))| a * ((j + 1) as f64 * t + ph).sin()).sum();
            DVector::from_element(1, v.clamp(-2.0, 2.0))
        };
        let (y, u) = simulate(&problem, &y0, &control, 0.0, theta, &opts)?;
        reports.push((format!("random{k}"), check_dissipation(&problem, &y, &u, &periodic, 0.0, theta, &opts)?));
    }
    let ok = reports.iter().all(|(_, r)| r.passed);
    let min_slack = reports.iter().map(|(_, r)| r.slack).fold(f64::INFINITY, f64::min);
    let failing: Vec<&str> = reports.iter().filter(|(_, r)| !r.passed).map(|(n, _)| n.as_str()).collect();
    rep.line(
        "7",
        ok,
        format!("{} trajectories, min slack {min_slack:.3e}, failing {failing:?}", reports.len()),
    );
    Ok(())
}

fn c8(rep: &mut Report) -> Result<()> {
    let opts = SolverOptions::default();
    let mut notes = Vec::new();
    let mut ok = true;

    // symmetry and PSD of every Riccati path
    let mut sym = 0.0f64;
    let mut eig = f64::INFINITY;
    let mut periodic_defect = 0.0f64;
    let mut boundary = 0.0f64;
    let mut control = 0.0f64;
    for name in ["scalar_example", "constant_test", "wave_1d"] {
        let sc = Scenario::named(name)?;
        let orbit = solve_periodic_orbit(&sc.problem, &sc.solver)?;
        let horizon = 5.0;
        let finite = solve_finite_horizon(&sc.problem, &sc.y0, horizon, &sc.solver)?;
        for p in [orbit.p(), &finite.p] {
            sym = sym.max(p.max_symmetry_defect());
            eig = eig.min(p.min_eigenvalue());
        }
        let p_wrap = (orbit.p().last() - orbit.p().first()).norm();
        let r_wrap = (orbit.r().last() - orbit.r().first()).norm();
        periodic_defect = periodic_defect.max(p_wrap).max(r_wrap).max(orbit.triple.periodicity_defect());
        boundary = boundary.max(finite.triple.lambda.last().norm());
        control = control
            .max(finite.triple.control_defect(&sc.problem))
            .max(orbit.triple.control_defect(&sc.problem));
    }
    ok &= sym <= C8_SYMMETRY && eig >= C8_PSD;
    notes.push(format!("sym {sym:.1e} min-eig {eig:.3e}"));

    // horizon monotonicity on the scalar example
    let (problem, _) = scalar_example();
    let zero = DMatrix::zeros(1, 1);
    let short = solve_riccati_terminal(&problem, 10.0, &zero, &opts)?;
    let long = solve_riccati_terminal(&problem, 20.0, &zero, &opts)?;
    let mono = short
        .grid()
        .iter()
        .zip(short.values())
        .map(|(t, p)| (long.eval(*t) - p).symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min);
    // both paths sit on P_θ here, so the difference is integrator noise
    let scale = long.values().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mono_tol = C8_COMPOSITION_FACTOR * opts.ode.rtol * scale;
    ok &= mono >= -mono_tol;
    notes.push(format!("min eig(P^20 - P^10) {mono:.2e} (≥ -{mono_tol:.0e})"));

    // composition law on the wave generator
    let wave = Scenario::named("wave_1d")?;
    let a = |t: f64| wave.problem.a(t);
    let n = wave.problem.state_dim();
    let (t0, r, t1) = (0.0, 0.37, 1.3);
    let whole = transition_matrix(&a, n, t0, t1, &wave.solver.ode)?;
    let split = transition_matrix(&a, n, r, t1, &wave.solver.ode)? * transition_matrix(&a, n, t0, r, &wave.solver.ode)?;
    let comp = (&whole - &split).norm() / whole.norm();
    let comp_tol = C8_COMPOSITION_FACTOR * (wave.solver.ode.rtol + wave.solver.ode.atol);
    ok &= comp <= comp_tol;
    notes.push(format!("composition {comp:.1e} (≤ {comp_tol:.0e})"));

    // periodicity, terminal adjoint and control consistency
    let per_tol = opts.periodic_tol;
    let open = monodromy(&a, n, wave.problem.period(), &wave.solver)?;
    let shifted = transition_matrix(&a, n, wave.problem.period(), 2.0 * wave.problem.period(), &wave.solver.ode)?;
    let map_defect = (&open.period_map - shifted).norm() / open.period_map.norm();
    notes.push(format!("periodic outputs {periodic_defect:.1e} (≤ {per_tol:e}), period maps {map_defect:.1e}"));
    ok &= periodic_defect <= per_tol && map_defect <= comp_tol;
    ok &= boundary <= C8_BOUNDARY && control <= C8_CONTROL;
    notes.push(format!("|λ(T)| {boundary:.1e} (≤ {C8_BOUNDARY:e}), u-consistency {control:.1e} (≤ {C8_CONTROL:e})"));

    rep.line("8", ok, notes.join(", "));
    Ok(())
}

fn c9(rep: &mut Report) -> Result<()> {
    let start = Instant::now();
    let descriptor = ScenarioDescriptor::default_for("heat_1d")?
        .with("n", 20.into())
        .with("horizon", 10.0.into())
        .with("period", 1.0.into());
    let sc = Scenario::from_descriptor(&descriptor)?;
    let periodic = solve_periodic_orbit(&sc.problem, &sc.solver)?;
    let finite = solve_finite_horizon(&sc.problem, &sc.y0, 10.0, &sc.solver)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    let ratio = e.eval(5.0)[0] / e.first()[0];
    let diss = check_dissipation(&sc.problem, &finite.triple.y, &finite.triple.u, &periodic, 0.0, 10.0, &sc.solver)?;
    let elapsed = start.elapsed();
    rep.line(
        "9",
        periodic.riccati.sweeps <= C9_MAX_SWEEPS && ratio <= C9_RATIO && diss.passed && elapsed <= C9_TIME,
        format!(
            "{} sweeps (≤ {C9_MAX_SWEEPS}), e(T/2)/e(0) = {ratio:.2e} (≤ {C9_RATIO:e}), dissipation slack {:.2e} passed={}, {:.1}s (≤ {}s)",
            periodic.riccati.sweeps,
            diss.slack,
            diss.passed,
            elapsed.as_secs_f64(),
            C9_TIME.as_secs()
        ),
    );
    Ok(())
}

fn c10(rep: &mut Report) -> Result<()> {
    let horizons = [20.0, 35.0, 50.0];
    let dir = tempfile::tempdir()?;
    let descriptor = ScenarioDescriptor::default_for("scalar_example")?;
    cmd_sweep(&descriptor, &horizons, dir.path(), &Overrides::default())?;
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json"))?)?;
    let spread = summary["nu_spread"].as_f64().unwrap_or(f64::INFINITY);
    let nu_mean = summary["nu_mean"].as_f64().unwrap_or(f64::NAN);
    let slope = summary["log_mid_slope"].as_f64().unwrap_or(f64::NAN);
    let nus: Vec<f64> = summary["horizons"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|h| h["nu_fit"].as_f64())
        .collect();
    rep.line("10a", spread <= C10_SPREAD, format!("nu_fit {nus:.4?}, spread {spread:.3} (≤ {C10_SPREAD})"));
    let rel = (slope + nu_mean).abs() / nu_mean;
    rep.line(
        "10b",
        rel <= C10_SLOPE_REL,
        format!("slope of ln e(T/2) vs T {slope:.4}, target -nu_fit {:.4}, relative miss {rel:.3} (≤ {C10_SLOPE_REL})", -nu_mean),
    );
    rep.info(
        "10b",
        format!(
            "e(T/2) ≈ 2C e^(-ν T/2) predicts slope -ν/2 = {:.4}; measured/(-ν/2) = {:.3}",
            -nu_mean / 2.0,
            slope / (-nu_mean / 2.0)
        ),
    );

    let (problem, y0) = scalar_example();
    let opts = SolverOptions::default();
    let periodic = solve_periodic_orbit(&problem, &opts)?;
    let rho = periodic.closed_loop().decay_rate;
    let mut narrow = Vec::new();
    for &h in &horizons {
        let finite = solve_finite_horizon(&problem, &y0, h, &opts)?;
        let e = deviation(&finite.triple, &periodic.triple)?;
        narrow.push(fit_envelope(&e, h, DEFAULT_ENVELOPE_FLOOR, (3.0 / rho).min(h / 4.0))?.nu_fit);
    }
    let lo = narrow.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = narrow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rep.info("10a", format!("window min(3/ρ, T/4): nu_fit {narrow:.4?}, spread {:.3}", (hi - lo) / lo));
    Ok(())
}

fn main() {
    let mut rep = Report { failed: Vec::new() };
    let r = c1_c2(&mut rep);
    rep.guard("1-2", r);
    let r = c3_c4(&mut rep);
    rep.guard("3-4", r);
    let r = c5(&mut rep);
    rep.guard("5", r);
    let r = c6(&mut rep);
    rep.guard("6", r);
    let r = c7(&mut rep);
    rep.guard("7", r);
    let r = c8(&mut rep);
    rep.guard("8", r);
    let r = c9(&mut rep);
    rep.guard("9", r);
    let r = c10(&mut rep);
    rep.guard("10", r);
    let unexpected: Vec<&String> = rep.failed.iter().filter(|id| !KNOWN_FAILURES.contains(&id.as_str())).collect();
    let fixed: Vec<&str> = KNOWN_FAILURES.iter().copied().filter(|id| !rep.failed.iter().any(|f| f == id)).collect();
    if rep.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {:?} (known: {KNOWN_FAILURES:?})", rep.failed);
    }
    if !unexpected.is_empty() || !fixed.is_empty() {
        println!("acceptance: unexpected failures {unexpected:?}, unexpected passes {fixed:?}");
        std::process::exit(1);
    }
}
