//! Lowest eigenvalues of the weighted operator on the unit circle for an
//! anisotropic neck.

use gaplab::geometry::{build_weight, GapGeometry};
use gaplab::spectral::solve_spectrum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geom = GapGeometry::diagonal(1e-2, &[1.0, 4.0])?;
    let basis = solve_spectrum(&build_weight(&geom, 512)?, 6)?;
    for (lam, err) in basis.eigenvalues.iter().zip(&basis.errors) {
        println!("{lam:.10} +/- {err:.1e}");
    }
    let space = basis.lambda1_space()?;
    println!("lambda1 = {:.10}, multiplicity {}", space.value, space.multiplicity());
    Ok(())
}
