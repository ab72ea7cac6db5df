//! Reduction of order for the radial operator, then recovery of the leading
//! coefficient of `2 r^α` plus the particular solution.

use gaplab::exponents::alpha_of;
use gaplab::radialode::{extract_leading, geometric_grid, reduction_of_order, RadialFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (lambda, n) = (0.48110988118, 3);
    let alpha = alpha_of(lambda, n)?;
    let r = geometric_grid(1e-5, 1.0, 2000);
    let h = RadialFunction::sample(r.clone(), |x| x.powf(1.0 + alpha) * (1.0 - 2.0 * x))?;
    let red = reduction_of_order(&h, lambda, n)?;
    println!("alpha = {alpha:.8}, self-convergence {:.1e}", red.error_estimate);
    let u: Vec<f64> = r.iter().zip(red.v.values()).map(|(x, v)| 2.0 * x.powf(alpha) + v).collect();
    let fit = extract_leading(&RadialFunction::new(r, u)?, alpha)?;
    println!("C1 = {:.8}, next = {:.4}, misfit {:.1e}", fit.c1_tilde, fit.next_coeff, fit.residual);
    Ok(())
}
