//! Upper-bound sweep for the ball in three dimensions.

use gaplab::harness::report::summary;
use gaplab::harness::{run_upper_sweep, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let res = run_upper_sweep(&ExperimentConfig::diagonal([1.0, 1.0]), 4).map_err(|p| p.error)?;
    print!("{}", summary(std::slice::from_ref(&res)));
    Ok(())
}
