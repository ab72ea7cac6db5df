//! Exponent algebra: `α(λ)`, the ball exponent `β(n)` and the predicted rate.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::spectral::SpectralBasis;

/// Positive root of `α² + (n−1)α − λ = 0`.
pub fn alpha_of(lambda: f64, n: usize) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GapError::usage(format!("lambda must be nonnegative, got {lambda}")));
    }
    if n < 3 {
        return Err(GapError::usage(format!("alpha needs n >= 3, got {n}")));
    }
    let b = (n - 1) as f64;
    // rationalized form avoids cancellation for small λ
    Ok(2.0 * lambda / (b + (b * b + 4.0 * lambda).sqrt()))
}

/// `λ` recovered from `α`.
pub fn lambda_of(alpha: f64, n: usize) -> f64 {
    alpha * alpha + (n - 1) as f64 * alpha
}

/// `[−(n−1) + √((n−1)² + 4(n−2))]/4`.
pub fn ball_beta(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(GapError::usage(format!("beta needs n >= 3, got {n}")));
    }
    let b = (n - 1) as f64;
    Ok((-b + (b * b + 4.0 * (n - 2) as f64).sqrt()) / 4.0)
}

/// Exponent of `ε` in the gradient rate.
pub fn gradient_exponent(alpha: f64) -> f64 {
    (alpha - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub n: usize,
    pub lambda1: f64,
    pub lambda1_error: f64,
    pub alpha: f64,
    /// `[α(λ₁ − δ), α(λ₁ + δ)]`.
    pub alpha_interval: (f64, f64),
    pub predicted_gradient_exponent: f64,
    pub predicted_gradient_interval: (f64, f64),
    pub ball_beta: f64,
}

impl ExponentReport {
    pub fn from_lambda(lambda1: f64, lambda1_error: f64, n: usize) -> Result<Self> {
        if !(lambda1 > 0.0) {
            return Err(GapError::Numerical {
                message: format!("first nonzero eigenvalue must be positive, got {lambda1}"),
                residual: lambda1,
            });
        }
        let err = lambda1_error.abs();
        let alpha = alpha_of(lambda1, n)?;
        // α is increasing, so the endpoints bound the interval
        let lo = alpha_of((lambda1 - err).max(0.0), n)?;
        let hi = alpha_of(lambda1 + err, n)?;
        Ok(ExponentReport {
            n,
            lambda1,
            lambda1_error: err,
            alpha,
            alpha_interval: (lo, hi),
            predicted_gradient_exponent: gradient_exponent(alpha),
            predicted_gradient_interval: (gradient_exponent(lo), gradient_exponent(hi)),
            ball_beta: ball_beta(n)?,
        })
    }
}

pub fn predict_rate(basis: &SpectralBasis) -> Result<ExponentReport> {
    ExponentReport::from_lambda(basis.lambda1()?, basis.lambda1_error()?, basis.weight.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of(0.0, 3).unwrap(), 0.0);
        assert!((alpha_of(1.0, 3).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let a = alpha_of(2.0, 4).unwrap();
        assert!((a - 0.5615528128).abs() < 1e-10);
        assert!((a * a + 3.0 * a - 2.0).abs() < 1e-12);
        assert!(matches!(alpha_of(-0.1, 3), Err(GapError::Usage(_))));
    }

    #[test]
    fn beta_examples() {
        assert!((ball_beta(3).unwrap() - 0.2071067812).abs() < 1e-10);
        assert!((ball_beta(4).unwrap() - 0.2807764064).abs() < 1e-10);
        for n in 3..=10 {
            let a = alpha_of((n - 2) as f64, n).unwrap();
            assert!((ball_beta(n).unwrap() - a / 2.0).abs() < 1e-14);
            assert!((-0.5 + ball_beta(n).unwrap() - gradient_exponent(a)).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_prediction() {
        let r = ExponentReport::from_lambda(1.0, 0.0, 3).unwrap();
        assert!((r.predicted_gradient_exponent - (2f64.sqrt() - 2.0) / 2.0).abs() < 1e-12);
        let small = ExponentReport::from_lambda(1e-12, 0.0, 3).unwrap();
        assert!((small.predicted_gradient_exponent + 0.5).abs() < 1e-9);
        assert!(ExponentReport::from_lambda(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn interval_brackets_the_value() {
        let r = ExponentReport::from_lambda(0.48, 1e-3, 3).unwrap();
        assert!(r.alpha_interval.0 < r.alpha && r.alpha < r.alpha_interval.1);
        assert!(r.predicted_gradient_interval.0 < r.predicted_gradient_exponent);
    }

    #[test]
    fn monotone_on_a_grid() {
        for n in 3..=6 {
            let vals: Vec<f64> = (0..100)
                .map(|i| alpha_of(i as f64 * 0.05, n).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]));
        }
    }

    proptest! {
        #[test]
        fn round_trip(lambda in 0.0f64..50.0, n in 3usize..12) {
            let a = alpha_of(lambda, n).unwrap();
            prop_assert!((lambda_of(a, n) - lambda).abs() <= 1e-12 * lambda.max(1.0));
        }

        #[test]
        fn range_below_ball_value(frac in 1e-6f64..1.0, n in 3usize..12) {
            let top = (n - 2) as f64;
            let a = alpha_of(frac * top, n).unwrap();
            prop_assert!(a > 0.0 && a <= 1.0);
            if frac < 1.0 {
                prop_assert!(a < 1.0);
            }
            let g = gradient_exponent(a);
            prop_assert!(g > -0.5 && g < 0.0);
        }
    }
}
