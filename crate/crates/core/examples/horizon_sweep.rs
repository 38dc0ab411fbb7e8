//! Fits for several horizons written to disk, as the `sweep` command does.
//!
//! cargo run --release --example horizon_sweep [-- OUTDIR]

use periodic_turnpike::cli::{cmd_sweep, Overrides};
use periodic_turnpike::scenarios::ScenarioDescriptor;

fn main() -> periodic_turnpike::Result<()> {
    let outdir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("turnpike-sweep"));
    let descriptor = ScenarioDescriptor::default_for("scalar_example")?;
    let manifest = cmd_sweep(&descriptor, &[20.0, 35.0, 50.0], &outdir, &Overrides::default())?;
    println!("wrote {} files under {}", manifest.files.len(), manifest.outdir);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(outdir.join("summary.json"))?)?;
    println!("     T     nu_fit      e(T/2)");
    for h in summary["horizons"].as_array().into_iter().flatten() {
        println!(
            "{:6.1}  {:9.5}  {:10.3e}",
            h["horizon"].as_f64().unwrap_or(f64::NAN),
            h["nu_fit"].as_f64().unwrap_or(f64::NAN),
            h["e_mid_layers"].as_f64().unwrap_or(f64::NAN)
        );
    }
    println!("nu spread            {}", summary["nu_spread"]);
    println!("slope of ln e(T/2)   {}", summary["log_mid_slope"]);
    Ok(())
}
