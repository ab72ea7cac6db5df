//! Lower-bound pipeline: odd first mode, amplitude at sqrt(eps) and the
//! gradient witness.

use gaplab::harness::config::BoundarySelector;
use gaplab::harness::report::summary;
use gaplab::harness::{run_lower_pipeline, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::diagonal([1.0, 4.0]);
    cfg.boundary = BoundarySelector::Coordinate { j: 2 };
    let res = run_lower_pipeline(&cfg, 4).map_err(|p| p.error)?;
    for r in &res.records {
        println!("eps = {:.1e}: amplitude {:?}, witness {:?}", r.epsilon, r.amplitude, r.witness);
    }
    print!("{}", summary(std::slice::from_ref(&res)));
    Ok(())
}
