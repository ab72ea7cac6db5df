//! Reduced equation on the disk with the first eigenfunction as boundary
//! data; prints the max gradient for a few gap widths.

use gaplab::geometry::{build_weight, GapGeometry};
use gaplab::reduced::{solve_reduced, DiskGrid, Forcing};
use gaplab::spectral::solve_spectrum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = DiskGrid::geometric(1.0, 300, 64, 1.04)?;
    for eps in [1e-2, 1e-3, 1e-4] {
        let w = build_weight(&GapGeometry::ball(3, eps)?, grid.n_theta())?;
        let phi = solve_spectrum(&w, 4)?.y1()?.to_vec();
        let field = solve_reduced(&w, eps, &grid, &phi, &Forcing::zero(), 1e-10)?;
        let (g, _, _) = field.max_gradient();
        println!("eps = {eps:.0e}: max |grad v| = {g:.6}");
    }
    Ok(())
}
