//! Log–log least squares.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope; absent with only two points.
    pub stderr: Option<f64>,
    pub points: usize,
}

impl PowerFit {
    /// `2·stderr`, or zero for an exact two-point fit.
    pub fn halfwidth(&self) -> f64 {
        2.0 * self.stderr.unwrap_or(0.0)
    }
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 2 {
        return Err(GapError::usage(format!(
            "a power-law fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(GapError::usage(format!(
            "power-law fit needs positive data, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(GapError::usage("power-law fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = (points.len() > 2).then(|| (sse / (n - 2.0) / sxx).sqrt());
    Ok(PowerFit {
        slope,
        intercept,
        r_squared,
        stderr,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x: &f64| (x, 5.0 * x.powf(-0.5)))
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points() {
        let e = std::f64::consts::E;
        let f = fit_exponent(&[(1.0, 1.0), (e, e * e)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert_eq!(f.stderr, None);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 10f64.powf(-4.0 + 0.2 * i as f64);
                (x, x.powf(0.414) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope - 0.414).abs() < 0.02);
        assert!(f.halfwidth() > 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_exponent(&[(1.0, 1.0)]), Err(GapError::Usage(_))));
        assert!(matches!(
            fit_exponent(&[(1.0, 1.0), (2.0, -1.0)]),
            Err(GapError::Usage(_))
        ));
    }
}
