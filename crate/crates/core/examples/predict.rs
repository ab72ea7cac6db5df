//! Predicted gradient exponent for the ball and for a flattened neck.

use gaplab::exponents::predict_rate;
use gaplab::geometry::{build_weight, GapGeometry};
use gaplab::spectral::solve_spectrum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for diag in [[1.0, 1.0], [1.0, 4.0]] {
        let geom = GapGeometry::diagonal(1e-2, &diag)?;
        let report = predict_rate(&solve_spectrum(&build_weight(&geom, 512)?, 4)?)?;
        println!(
            "M = diag{diag:?}: alpha = {:.6}, |grad u| ~ eps^{:.6} (interval {:.6}..{:.6})",
            report.alpha,
            report.predicted_gradient_exponent,
            report.predicted_gradient_interval.0,
            report.predicted_gradient_interval.1
        );
    }
    Ok(())
}
