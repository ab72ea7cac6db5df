//! Quadrature on periodic and spherical grids.

use std::f64::consts::PI;

/// Weights of the periodic trapezoid rule normalized to sum to one.
pub fn periodic_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Cell-area weights `sin φ_p Δφ Δθ` of an offset latitude–longitude grid,
/// normalized so they sum to one. Ordered colatitude-major.
pub fn latlong_weights(n_phi: usize, n_theta: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_phi)
        .map(|p| ((p as f64 + 0.5) * PI / n_phi as f64).sin())
        .collect();
    let total: f64 = raw.iter().sum::<f64>() * n_theta as f64;
    let mut out = Vec::with_capacity(n_phi * n_theta);
    for w in &raw {
        out.extend(std::iter::repeat(w / total).take(n_theta));
    }
    out
}

/// Average of `f` under normalized weights.
pub fn average(weights: &[f64], f: &[f64]) -> f64 {
    weights.iter().zip(f).map(|(w, v)| w * v).sum()
}
