//! Batch drivers behind the `turnpike` binary: solve a scenario for one
//! horizon (`run`) or several (`sweep`) and write every path and report to
//! an output directory, together with a manifest of SHA-256 checksums.
//!
//! Exit codes are 0 on success, 1 for solver failures and 2 for usage or
//! scenario errors; failures print `{"schema_version", "error": {kind,
//! message}}` to stdout.

use std::ffi::OsString;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{monodromy, MonodromyReport};
use crate::io::{
    joint_csv, matrix_path_csv, to_json, vector_path_csv, write_text, PathMetadata, SCHEMA_VERSION,
};
use crate::ode::OdeOptions;
use crate::options::SolverOptions;
use crate::path::VectorPath;
use crate::problem::ValidationReport;
use crate::scenarios::{Scenario, ScenarioDescriptor};
use crate::shooting::{solve_extremal_bvp, ShootingConfig};
use crate::turnpike::{
    check_dissipation, default_window, deviation, fit_envelope, layer_deviation, riccati_gap_profile,
    solve_finite_horizon, solve_periodic_orbit, DissipationReport, GapFit, PeriodicOrbit, TurnpikeFit,
    DEFAULT_ENVELOPE_FLOOR, DEFAULT_GAP_FLOOR,
};

/// Largest horizon and state dimension for which `run` cross-checks against
/// the shooting oracle.
pub const ORACLE_MAX_HORIZON: f64 = 10.0;
pub const ORACLE_MAX_STATE_DIM: usize = 40;
/// Agreement required between synthesis and shooting.
pub const ORACLE_TOLERANCE: f64 = 1e-5;

/// Command-line overrides of the scenario's solver settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub tol_riccati: Option<f64>,
    pub tol_ode: Option<f64>,
    pub stiff: bool,
    pub skip_oracle: bool,
}

impl Overrides {
    pub fn apply(&self, mut solver: SolverOptions) -> Result<SolverOptions> {
        if let Some(tol) = self.tol_riccati {
            if !(tol > 0.0) {
                return Err(Error::Usage(format!("--tol-riccati must be positive, got {tol}")));
            }
            solver.periodic_tol = tol;
        }
        if self.stiff {
            solver.ode = OdeOptions {
                rtol: solver.ode.rtol,
                atol: solver.ode.atol,
                ..OdeOptions::stiff(solver.sample_step)
            };
        }
        if let Some(tol) = self.tol_ode {
            if !(tol > 0.0) {
                return Err(Error::Usage(format!("--tol-ode must be positive, got {tol}")));
            }
            solver.ode.rtol = tol;
            solver.ode.atol = tol * 1e-3;
        }
        Ok(solver)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub scenario: ScenarioDescriptor,
    pub horizons: Vec<f64>,
    pub overrides: Overrides,
    pub solver: SolverOptions,
    pub outdir: String,
    pub files: Vec<FileEntry>,
}

/// Writes files below a root directory and records their checksums.
struct Emitter {
    root: PathBuf,
    prefix: String,
    files: Vec<FileEntry>,
}

impl Emitter {
    fn new(root: &FsPath, prefix: &str) -> Self {
        Emitter {
            root: root.to_path_buf(),
            prefix: prefix.to_owned(),
            files: Vec::new(),
        }
    }

    fn emit(&mut self, name: &str, text: &str) -> Result<()> {
        let rel = if self.prefix.is_empty() {
            name.to_owned()
        } else {
            format!("{}/{name}", self.prefix)
        };
        write_text(&self.root.join(&rel), text)?;
        self.files.push(FileEntry {
            path: rel,
            bytes: text.len(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        });
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.emit(name, &to_json(value)?)
    }

    /// CSV plus its JSON sidecar.
    fn emit_path(&mut self, name: &str, csv: &str, meta: &PathMetadata) -> Result<()> {
        self.emit(&format!("{name}.csv"), csv)?;
        self.emit_json(&format!("{name}.json"), meta)
    }
}

#[derive(Clone, Debug, Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned<T: Serialize>(body: &T) -> Versioned<'_, T> {
    Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    }
}

/// Envelope fit of one horizon, or the reason it could not be formed.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeRecord {
    pub fit: Option<TurnpikeFit>,
    pub degenerate: Option<String>,
    pub window: f64,
    /// Closed-loop decay rate from the period map.
    pub rho: f64,
    /// `e(T/2)` from the direct difference.
    pub e_mid: f64,
    /// `e(T/2)` from the layer equations.
    pub e_mid_layers: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRecord {
    pub fit: Option<GapFit>,
    pub degenerate: Option<String>,
    pub floor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRecord {
    pub distance_y: Option<f64>,
    pub distance_u: Option<f64>,
    pub distance_lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub residual_history: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyRecord {
    pub closed_loop: MonodromyReport,
    pub open_loop: MonodromyReport,
}

/// Headline numbers of one horizon.
#[derive(Clone, Debug, Serialize)]
pub struct HorizonSummary {
    pub horizon: f64,
    pub cost: f64,
    pub nu_fit: Option<f64>,
    pub nu_initial: Option<f64>,
    pub nu_final: Option<f64>,
    pub c_fit: Option<f64>,
    pub mu_fit: Option<f64>,
    pub e_mid: f64,
    pub e_mid_layers: f64,
    pub dissipation_passed: bool,
    pub dissipation_slack: f64,
}

fn split<T>(r: Result<T>) -> Result<(Option<T>, Option<String>)> {
    match r {
        Ok(v) => Ok((Some(v), None)),
        Err(Error::DegenerateFit(msg)) => Ok((None, Some(msg))),
        Err(e) => Err(e),
    }
}

fn deviation_csv(e: &VectorPath, layers: &VectorPath) -> Result<String> {
    joint_csv(&[("e", e), ("e_layers", layers)])
}

/// Solves one horizon against a shared periodic solution and writes its
/// files through `out`.
fn run_horizon(
    scenario: &Scenario,
    periodic: &PeriodicOrbit,
    horizon: f64,
    solver: &SolverOptions,
    with_oracle: bool,
    out: &mut Emitter,
) -> Result<HorizonSummary> {
    let problem = &scenario.problem;
    let theta = problem.period();
    let finite = solve_finite_horizon(problem, &scenario.y0, horizon, solver)?;
    let e = deviation(&finite.triple, &periodic.triple)?;
    let layers = layer_deviation(problem, &finite, periodic, solver)?;
    let rho = periodic.closed_loop().decay_rate;
    let window = default_window(rho, theta, horizon);
    let (fit, degenerate) = split(fit_envelope(&e, horizon, DEFAULT_ENVELOPE_FLOOR, window))?;
    let envelope = EnvelopeRecord {
        fit,
        degenerate,
        window,
        rho,
        e_mid: e.eval(0.5 * horizon)[0],
        e_mid_layers: layers.e.eval(0.5 * horizon)[0],
    };
    let (gap_fit, gap_degenerate) = split(riccati_gap_profile(
        &finite.p,
        periodic.p(),
        horizon,
        theta,
        rho,
        DEFAULT_GAP_FLOOR,
    ))?;
    let gap = GapRecord {
        fit: gap_fit,
        degenerate: gap_degenerate,
        floor: DEFAULT_GAP_FLOOR,
    };
    let dissipation: DissipationReport = check_dissipation(
        problem,
        &finite.triple.y,
        &finite.triple.u,
        periodic,
        0.0,
        horizon,
        solver,
    )?;

    let t = &finite.triple;
    out.emit_path(
        "p_finite",
        &matrix_path_csv(&finite.p, "p"),
        &PathMetadata::for_path("p_finite", &finite.p, None, solver),
    )?;
    out.emit_path(
        "r_finite",
        &vector_path_csv(&finite.r, "r"),
        &PathMetadata::for_path("r_finite", &finite.r, None, solver),
    )?;
    out.emit_path(
        "finite_triple",
        &joint_csv(&[("y", &t.y), ("u", &t.u), ("lambda", &t.lambda)])?,
        &PathMetadata::for_path("finite_triple", &t.y, None, solver),
    )?;
    out.emit_path(
        "deviation",
        &deviation_csv(&e, &layers.e)?,
        &PathMetadata::for_path("deviation", &e, None, solver),
    )?;
    out.emit_json("turnpike_fit.json", &versioned(&envelope))?;
    out.emit_json("riccati_gap.json", &versioned(&gap))?;
    out.emit_json("dissipation.json", &versioned(&dissipation))?;

    if with_oracle {
        let record = match solve_extremal_bvp(problem, &scenario.y0, horizon, &ShootingConfig::default()) {
            Ok(o) => {
                let (dy, du, dl) = t.distance(&o.triple)?;
                OracleRecord {
                    distance_y: Some(dy),
                    distance_u: Some(du),
                    distance_lambda: Some(dl),
                    iterations: Some(o.iterations),
                    residual_history: o.residual_history,
                    tolerance: ORACLE_TOLERANCE,
                    passed: dy.max(du).max(dl) <= ORACLE_TOLERANCE,
                    error: None,
                }
            }
            Err(err) => OracleRecord {
                distance_y: None,
                distance_u: None,
                distance_lambda: None,
                iterations: None,
                residual_history: Vec::new(),
                tolerance: ORACLE_TOLERANCE,
                passed: false,
                error: Some(format!("{}: {err}", err.kind())),
            },
        };
        out.emit_json("oracle.json", &versioned(&record))?;
    }

    Ok(HorizonSummary {
        horizon,
        cost: t.cost,
        nu_fit: envelope.fit.as_ref().map(|f| f.nu_fit),
        nu_initial: envelope.fit.as_ref().and_then(|f| f.nu_initial),
        nu_final: envelope.fit.as_ref().and_then(|f| f.nu_final),
        c_fit: envelope.fit.as_ref().map(|f| f.c_fit),
        mu_fit: gap.fit.as_ref().map(|f| f.mu_fit),
        e_mid: envelope.e_mid,
        e_mid_layers: envelope.e_mid_layers,
        dissipation_passed: dissipation.passed,
        dissipation_slack: dissipation.slack,
    })
}

/// Validation, periodic solution and period-level files shared by all
/// horizons of one invocation.
fn run_periodic(scenario: &Scenario, solver: &SolverOptions, out: &mut Emitter) -> Result<PeriodicOrbit> {
    let problem = &scenario.problem;
    let report: ValidationReport = problem.validate(257)?;
    out.emit_json("validation.json", &versioned(&report))?;
    if !report.passed {
        return Err(Error::InvalidProblem(
            "problem failed validation; see validation.json".into(),
        ));
    }
    let periodic = solve_periodic_orbit(problem, solver)?;
    let a = |t: f64| problem.a(t);
    let open_loop = monodromy(&a, problem.state_dim(), problem.period(), solver)?;
    let theta = Some(problem.period());
    out.emit_path(
        "p_theta",
        &matrix_path_csv(periodic.p(), "p"),
        &PathMetadata::for_path("p_theta", periodic.p(), theta, solver),
    )?;
    out.emit_path(
        "r_theta",
        &vector_path_csv(periodic.r(), "r"),
        &PathMetadata::for_path("r_theta", periodic.r(), theta, solver),
    )?;
    let t = &periodic.triple;
    out.emit_path(
        "periodic_triple",
        &joint_csv(&[("y", &t.y), ("u", &t.u), ("lambda", &t.lambda)])?,
        &PathMetadata::for_path("periodic_triple", &t.y, theta, solver),
    )?;
    out.emit_json(
        "monodromy.json",
        &versioned(&MonodromyRecord {
            closed_loop: periodic.closed_loop().clone(),
            open_loop,
        }),
    )?;
    Ok(periodic)
}

fn manifest(
    command: &str,
    descriptor: &ScenarioDescriptor,
    horizons: Vec<f64>,
    overrides: &Overrides,
    solver: SolverOptions,
    outdir: &FsPath,
    mut files: Vec<FileEntry>,
) -> Result<RunManifest> {
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let m = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: command.to_owned(),
        scenario: descriptor.clone(),
        horizons,
        overrides: *overrides,
        solver,
        outdir: outdir.display().to_string(),
        files,
    };
    write_text(&outdir.join("manifest.json"), &to_json(&m)?)?;
    Ok(m)
}

/// Solves one scenario for one horizon (the scenario's own when `None`).
pub fn cmd_run(
    descriptor: &ScenarioDescriptor,
    horizon: Option<f64>,
    outdir: &FsPath,
    overrides: &Overrides,
) -> Result<RunManifest> {
    let scenario = Scenario::from_descriptor(descriptor)?;
    let horizon = horizon.unwrap_or(scenario.horizon);
    if !(horizon > 0.0) {
        return Err(Error::Usage(format!("horizon must be positive, got {horizon}")));
    }
    let solver = overrides.apply(scenario.solver)?;
    let mut out = Emitter::new(outdir, "");
    let periodic = run_periodic(&scenario, &solver, &mut out)?;
    let with_oracle = !overrides.skip_oracle
        && horizon <= ORACLE_MAX_HORIZON
        && scenario.problem.state_dim() <= ORACLE_MAX_STATE_DIM;
    let summary = run_horizon(&scenario, &periodic, horizon, &solver, with_oracle, &mut out)?;
    out.emit_json("summary.json", &versioned(&summary))?;
    manifest("run", descriptor, vec![horizon], overrides, solver, outdir, out.files)
}

/// Cross-horizon comparison written by `sweep`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub horizons: Vec<HorizonSummary>,
    /// `(max - min) / min` of the fitted decay rates.
    pub nu_spread: Option<f64>,
    pub nu_mean: Option<f64>,
    /// Least-squares slope of `ln e(T/2)` (layer equations) against `T`.
    pub log_mid_slope: Option<f64>,
    /// Largest deviation of `ln e(T/2)` from that line.
    pub log_mid_affine_residual: Option<f64>,
    pub mid_deviation_decreasing: bool,
}

impl SweepSummary {
    pub fn new(mut horizons: Vec<HorizonSummary>) -> Self {
        horizons.sort_by(|a, b| a.horizon.total_cmp(&b.horizon));
        let nus: Option<Vec<f64>> = horizons.iter().map(|h| h.nu_fit).collect();
        let (nu_spread, nu_mean) = match &nus {
            Some(v) if !v.is_empty() => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (Some((hi - lo) / lo), Some(v.iter().sum::<f64>() / v.len() as f64))
            }
            _ => (None, None),
        };
        let pts: Vec<(f64, f64)> = horizons
            .iter()
            .filter(|h| h.e_mid_layers > 0.0)
            .map(|h| (h.horizon, h.e_mid_layers.ln()))
            .collect();
        let (log_mid_slope, log_mid_affine_residual) = if pts.len() >= 2 && pts.len() == horizons.len() {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let b = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
            let res = pts
                .iter()
                .map(|p| (p.1 - my - b * (p.0 - mx)).abs())
                .fold(0.0, f64::max);
            (Some(b), Some(res))
        } else {
            (None, None)
        };
        let mid_deviation_decreasing = horizons.windows(2).all(|w| w[1].e_mid_layers < w[0].e_mid_layers);
        SweepSummary {
            horizons,
            nu_spread,
            nu_mean,
            log_mid_slope,
            log_mid_affine_residual,
            mid_deviation_decreasing,
        }
    }

    fn csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(crate::io::format_f64).unwrap_or_default();
        let mut s = String::from("T,nu_fit,nu_initial,nu_final,c_fit,mu_fit,e_mid,e_mid_layers,cost\n");
        for h in &self.horizons {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                crate::io::format_f64(h.horizon),
                opt(h.nu_fit),
                opt(h.nu_initial),
                opt(h.nu_final),
                opt(h.c_fit),
                opt(h.mu_fit),
                crate::io::format_f64(h.e_mid),
                crate::io::format_f64(h.e_mid_layers),
                crate::io::format_f64(h.cost),
            ));
        }
        s
    }
}

/// Directory name used for one horizon of a sweep.
pub fn horizon_dir(horizon: f64) -> String {
    format!("T_{horizon}")
}

/// Solves one scenario for several horizons sharing one periodic solution.
pub fn cmd_sweep(
    descriptor: &ScenarioDescriptor,
    horizons: &[f64],
    outdir: &FsPath,
    overrides: &Overrides,
) -> Result<RunManifest> {
    if horizons.len() < 2 {
        return Err(Error::Usage(format!(
            "sweep needs at least two horizons, got {}",
            horizons.len()
        )));
    }
    if let Some(h) = horizons.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::Usage(format!("horizon must be positive, got {h}")));
    }
    let scenario = Scenario::from_descriptor(descriptor)?;
    let solver = overrides.apply(scenario.solver)?;
    let mut out = Emitter::new(outdir, "");
    let periodic = run_periodic(&scenario, &solver, &mut out)?;
    let results = horizons
        .par_iter()
        .map(|&h| {
            let mut sub = Emitter::new(outdir, &horizon_dir(h));
            let summary = run_horizon(&scenario, &periodic, h, &solver, false, &mut sub)?;
            Ok((summary, sub.files))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summaries = Vec::new();
    for (s, files) in results {
        summaries.push(s);
        out.files.extend(files);
    }
    let summary = SweepSummary::new(summaries);
    out.emit("summary.csv", &summary.csv())?;
    out.emit_json("summary.json", &versioned(&summary))?;
    manifest("sweep", descriptor, horizons.to_vec(), overrides, solver, outdir, out.files)
}

#[derive(Parser, Debug)]
#[command(name = "turnpike", about = "Periodic LQ tracking: Riccati synthesis and turnpike diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one horizon and write paths, fits and reports.
    Run(CommonArgs),
    /// Solve several horizons and summarize how the fits depend on T.
    Sweep(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Scenario name or path to a JSON descriptor.
    #[arg(long)]
    scenario: String,
    /// Horizon T (repeatable; `run` takes at most one).
    #[arg(long = "horizon")]
    horizons: Vec<f64>,
    /// Convergence tolerance of the periodic sweeps.
    #[arg(long)]
    tol_riccati: Option<f64>,
    /// Relative ODE tolerance (absolute is 1e-3 of it).
    #[arg(long)]
    tol_ode: Option<f64>,
    #[arg(long)]
    outdir: PathBuf,
    /// Do not cross-check against the shooting oracle.
    #[arg(long)]
    skip_oracle: bool,
    /// Use the fixed-step implicit integrator.
    #[arg(long)]
    stiff: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol_riccati: self.tol_riccati,
            tol_ode: self.tol_ode,
            stiff: self.stiff,
            skip_oracle: self.skip_oracle,
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::InvalidScenario(_) => 2,
        _ => 1,
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

pub fn error_json(err: &Error) -> String {
    let report = ErrorReport {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind: err.kind(),
            message: err.to_string(),
        },
    };
    serde_json::to_string(&report).unwrap_or_else(|_| String::from("{\"schema_version\":1}"))
}

fn dispatch(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::Run(args) => {
            let descriptor = ScenarioDescriptor::resolve(&args.scenario)?;
            if args.horizons.len() > 1 {
                return Err(Error::Usage("run takes at most one --horizon".into()));
            }
            cmd_run(&descriptor, args.horizons.first().copied(), &args.outdir, &args.overrides())
        }
        Command::Sweep(args) => {
            let descriptor = ScenarioDescriptor::resolve(&args.scenario)?;
            cmd_sweep(&descriptor, &args.horizons, &args.outdir, &args.overrides())
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            println!("{}", error_json(&Error::Usage(e.to_string().trim().to_owned())));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(m) => {
            println!("{}", m.outdir);
            0
        }
        Err(err) => {
            println!("{}", error_json(&err));
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_update_solver_settings() {
        let o = Overrides {
            tol_riccati: Some(1e-8),
            tol_ode: Some(1e-7),
            stiff: true,
            skip_oracle: false,
        };
        let s = o.apply(SolverOptions::default()).unwrap();
        assert_eq!(s.periodic_tol, 1e-8);
        assert_eq!(s.ode.rtol, 1e-7);
        assert!(matches!(s.ode.method, crate::ode::Method::ImplicitMidpoint { .. }));
        let bad = Overrides {
            tol_ode: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(bad.apply(SolverOptions::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn error_report_shape() {
        let v: serde_json::Value =
            serde_json::from_str(&error_json(&Error::InvalidScenario("plasma".into()))).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["error"]["kind"], "invalid_scenario");
        assert_eq!(exit_code(&Error::InvalidScenario(String::new())), 2);
        assert_eq!(exit_code(&Error::StabilityViolation { spectral_radius: 2.0 }), 1);
    }

    #[test]
    fn horizon_directories() {
        assert_eq!(horizon_dir(50.0), "T_50");
        assert_eq!(horizon_dir(2.5), "T_2.5");
    }
}
