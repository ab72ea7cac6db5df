//! Writes a combined report for both sweeps into a temporary directory.

use gaplab::harness::{emit_report, run_lower_pipeline, run_upper_sweep, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::diagonal([1.0, 1.0]);
    let sweeps = vec![
        run_upper_sweep(&cfg, 4).map_err(|p| p.error)?,
        run_lower_pipeline(&cfg, 4).map_err(|p| p.error)?,
    ];
    let dir = std::env::temp_dir().join("gaplab-report-example");
    let files = emit_report(&sweeps, &dir)?;
    for p in files.all() {
        println!("wrote {}", p.display());
    }
    print!("{}", files.summary);
    Ok(())
}
