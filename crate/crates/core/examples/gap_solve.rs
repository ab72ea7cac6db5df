//! Full two-dimensional gap problem with odd boundary data.

use gaplab::gapfull::{map_strip, solve_gap, StripSizes};
use gaplab::geometry::GapGeometry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sizes = StripSizes {
        lateral: 200,
        n_theta: 1,
        vertical: 16,
        stretch: 6.0,
    };
    for eps in [1e-2, 1e-3, 1e-4] {
        let strip = map_strip(&GapGeometry::diagonal(eps, &[1.0])?, 1.0, sizes)?;
        let sol = solve_gap(&strip, &[-1.0, 1.0], 1e-10)?;
        println!(
            "eps = {eps:.0e}: max |grad u| = {:.4}, flux imbalance {:.1e}, {} iterations",
            sol.max_gradient,
            sol.flux_imbalance(),
            sol.iterations
        );
    }
    Ok(())
}
