//! Radial mode equation `L U = r²U″ + n r U′ − λU = H`.
//!
//! In `s = ln r` the operator is `U_ss + (n−1)U_s − λU`; [`apply_L`] uses
//! three-point differences in `s`, so geometric grids are treated as
//! uniform ones. The bounded particular solution is
//! `v = r^α ∫₀^r t^{−(n+2α)} ∫₀^t τ^{n−2+α} H(τ) dτ dt`.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::exponents::alpha_of;
use crate::harness::fit::fit_exponent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    r: Vec<f64>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() != values.len() {
            return Err(GapError::usage(format!(
                "{} radii but {} values",
                r.len(),
                values.len()
            )));
        }
        if r.first().is_some_and(|&r0| !(r0 > 0.0)) {
            return Err(GapError::usage("radial grid must start above zero"));
        }
        if r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GapError::usage("radial grid must be strictly increasing"));
        }
        if values.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(GapError::usage("radial function has non-finite entries"));
        }
        Ok(RadialFunction { r, values })
    }

    /// Samples `f` on `r`.
    pub fn sample(r: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = r.iter().map(|&x| f(x)).collect();
        Self::new(r, values)
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// `count` points with constant ratio between `r_min` and `r_max`.
pub fn geometric_grid(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    let (a, b) = (r_min.ln(), r_max.ln());
    let last = (count.max(2) - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                r_max
            } else {
                (a + (b - a) * i as f64 / last).exp()
            }
        })
        .collect()
}

/// First and second derivative weights of the quadratic through three points.
fn three_point(x: [f64; 3], at: usize) -> ([f64; 3], [f64; 3]) {
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let den = (x[k] - x[i]) * (x[k] - x[j]);
        d1[k] = ((x[at] - x[i]) + (x[at] - x[j])) / den;
        d2[k] = 2.0 / den;
    }
    (d1, d2)
}

#[allow(non_snake_case)]
pub fn apply_L(u: &RadialFunction, lambda: f64, n: usize) -> Result<RadialFunction> {
    let m = u.len();
    if m < 3 {
        return Err(GapError::usage("apply_L needs at least 3 nodes"));
    }
    let s: Vec<f64> = u.r.iter().map(|r| r.ln()).collect();
    let v = &u.values;
    let nm1 = (n as f64) - 1.0;
    let out = (0..m)
        .map(|i| {
            let (c, at) = match i {
                0 => (0, 0),
                _ if i + 1 == m => (m - 3, 2),
                _ => (i - 1, 1),
            };
            let (d1, d2) = three_point([s[c], s[c + 1], s[c + 2]], at);
            let (mut us, mut uss) = (0.0, 0.0);
            for k in 0..3 {
                us += d1[k] * v[c + k];
                uss += d2[k] * v[c + k];
            }
            uss + nm1 * us - lambda * v[i]
        })
        .collect();
    RadialFunction::new(u.r.clone(), out)
}

/// `∫` of samples `g` over each cell assuming `g ∝ x^p` inside the cell,
/// falling back to the trapezoid rule when the samples change sign.
fn power_law_cell(x0: f64, x1: f64, g0: f64, g1: f64) -> f64 {
    if g0 != 0.0 && g1 != 0.0 && g0.signum() == g1.signum() {
        let p = (g1 / g0).ln() / (x1 / x0).ln();
        if (p + 1.0).abs() > 1e-10 {
            return (g1 * x1 - g0 * x0) / (p + 1.0);
        }
        return g0 * x0 * (x1 / x0).ln();
    }
    0.5 * (g0 + g1) * (x1 - x0)
}

/// `∫₀^{x₀}` of a power law extrapolated from the first two samples.
fn power_law_head(x: &[f64], g: &[f64], what: &str) -> Result<f64> {
    let (x0, g0) = (x[0], g[0]);
    if g0 == 0.0 {
        return Ok(0.0);
    }
    if g.len() > 1 && g[1] != 0.0 && g[1].signum() == g0.signum() {
        let p = (g[1] / g0).ln() / (x[1] / x0).ln();
        if p <= -1.0 + 1e-9 {
            return Err(GapError::Inapplicable(format!(
                "{what} integrand behaves like r^{p:.3} at the origin and does not integrate"
            )));
        }
        return Ok(g0 * x0 / (p + 1.0));
    }
    Ok(0.5 * g0 * x0)
}

fn cumulative(x: &[f64], g: &[f64], what: &str) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = power_law_head(x, g, what)?;
    out.push(acc);
    for i in 1..x.len() {
        acc += power_law_cell(x[i - 1], x[i], g[i - 1], g[i]);
        out.push(acc);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub v: RadialFunction,
    pub w: RadialFunction,
    /// Largest relative change of `v` when every other node is dropped.
    pub error_estimate: f64,
}

fn reduce_on(r: &[f64], h: &[f64], alpha: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = n as f64;
    let g: Vec<f64> = r
        .iter()
        .zip(h)
        .map(|(t, hv)| t.powf(nf - 2.0 + alpha) * hv)
        .collect();
    let inner = cumulative(r, &g, "inner")?;
    let k: Vec<f64> = r
        .iter()
        .zip(&inner)
        .map(|(t, i)| t.powf(-(nf + 2.0 * alpha)) * i)
        .collect();
    let w = cumulative(r, &k, "outer")?;
    let v = r.iter().zip(&w).map(|(t, wv)| t.powf(alpha) * wv).collect();
    Ok((v, w))
}

/// Bounded particular solution of `L v = H`.
pub fn reduction_of_order(h: &RadialFunction, lambda: f64, n: usize) -> Result<Reduction> {
    if h.len() < 3 {
        return Err(GapError::usage("reduction of order needs at least 3 nodes"));
    }
    let alpha = alpha_of(lambda, n)?;
    let (v, w) = reduce_on(&h.r, &h.values, alpha, n)?;
    let rc: Vec<f64> = h.r.iter().step_by(2).copied().collect();
    let hc: Vec<f64> = h.values.iter().step_by(2).copied().collect();
    let error_estimate = if rc.len() >= 3 {
        let (vc, _) = reduce_on(&rc, &hc, alpha, n)?;
        let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if scale > 0.0 {
            vc.iter()
                .zip(v.iter().step_by(2))
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                / scale
        } else {
            0.0
        }
    } else {
        f64::INFINITY
    };
    Ok(Reduction {
        v: RadialFunction::new(h.r.clone(), v)?,
        w: RadialFunction::new(h.r.clone(), w)?,
        error_estimate,
    })
}

/// Upper end of the small-`r` window used by [`extract_leading`].
pub const LEADING_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub c1_tilde: f64,
    /// Coefficient of the `r^{1+α}` correction in the two-term model.
    pub next_coeff: f64,
    /// Fitted exponent of `|U − C̃₁ r^α|`; absent when the remainder is at
    /// rounding level.
    pub remainder_slope: Option<f64>,
    pub remainder_max: f64,
    /// RMS misfit of the two-term model relative to the RMS of `U`.
    pub residual: f64,
}

/// Fits `U ≈ C̃₁ r^α + D r^{1+α}` on `[r_min, 0.1]`.
pub fn extract_leading(u: &RadialFunction, alpha: f64) -> Result<LeadingFit> {
    let idx: Vec<usize> = (0..u.len()).filter(|&i| u.r[i] <= LEADING_WINDOW).collect();
    if idx.len() < 5 {
        return Err(GapError::usage(format!(
            "leading-order window holds {} points, need at least 5",
            idx.len()
        )));
    }
    // U / r^α = C + D r, ordinary least squares
    let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        let (x, y) = (u.r[i], u.values[i] / u.r[i].powf(alpha));
        s1 += 1.0;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let det = s1 * sxx - sx * sx;
    let d = (s1 * sxy - sx * sy) / det;
    let c = (sy - d * sx) / s1;
    let rem: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| (u.r[i], u.values[i] - c * u.r[i].powf(alpha)))
        .collect();
    let scale = idx.iter().fold(0.0_f64, |m, &i| m.max(u.values[i].abs()));
    let remainder_max = rem.iter().fold(0.0_f64, |m, p| m.max(p.1.abs()));
    let remainder_slope = if remainder_max > 1e-10 * scale {
        let pts: Vec<(f64, f64)> = rem
            .iter()
            .filter(|p| p.1 != 0.0)
            .map(|&(x, y)| (x, y.abs()))
            .collect();
        fit_exponent(&pts).ok().map(|f| f.slope)
    } else {
        None
    };
    let (mut mis, mut tot) = (0.0, 0.0);
    for &i in &idx {
        let model = c * u.r[i].powf(alpha) + d * u.r[i].powf(1.0 + alpha);
        mis += (u.values[i] - model).powi(2);
        tot += u.values[i].powi(2);
    }
    Ok(LeadingFit {
        c1_tilde: c,
        next_coeff: d,
        remainder_slope,
        remainder_max,
        residual: if tot > 0.0 { (mis / tot).sqrt() } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const N: usize = 3;

    fn grid(count: usize) -> Vec<f64> {
        geometric_grid(1e-5, 1.0, count)
    }

    fn middle(len: usize) -> std::ops::Range<usize> {
        len / 10..len - len / 10
    }

    #[test]
    fn constant_maps_to_minus_lambda() {
        let u = RadialFunction::sample(grid(50), |_| 2.5).unwrap();
        let lu = apply_L(&u, 0.7, N).unwrap();
        assert!(lu.values().iter().all(|v| (v + 0.7 * 2.5).abs() < 1e-12));
    }

    #[test]
    fn indicial_root_is_annihilated() {
        let lam = 0.48;
        let a = alpha_of(lam, N).unwrap();
        let r = grid(40_000);
        let u = RadialFunction::sample(r.clone(), |x| x.powf(a)).unwrap();
        let lu = apply_L(&u, lam, N).unwrap();
        for i in middle(r.len()) {
            assert!(lu.values()[i].abs() < 1e-6 * r[i].powf(a));
        }
    }

    #[test]
    fn too_few_nodes() {
        let u = RadialFunction::new(vec![0.1, 0.2], vec![1.0, 1.0]).unwrap();
        assert!(matches!(apply_L(&u, 1.0, N), Err(GapError::Usage(_))));
        assert!(RadialFunction::new(vec![0.2, 0.1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_source_gives_zero() {
        let h = RadialFunction::sample(grid(100), |_| 0.0).unwrap();
        let red = reduction_of_order(&h, 1.0, N).unwrap();
        assert!(red.v.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn power_sources_have_closed_forms() {
        let lam = 1.0;
        let a = alpha_of(lam, N).unwrap();
        let nf = N as f64;
        let r = grid(2000);
        for (p, den) in [
            (1.0 + a, nf + 2.0 * a),
            (2.0 + a, (2.0 + a).powi(2) + (nf - 1.0) * (2.0 + a) - lam),
        ] {
            let h = RadialFunction::sample(r.clone(), |x| x.powf(p)).unwrap();
            let red = reduction_of_order(&h, lam, N).unwrap();
            for i in middle(r.len()) {
                let want = r[i].powf(p) / den;
                assert!((red.v.values()[i] - want).abs() < 1e-8 * want);
            }
            assert!(red.error_estimate < 1e-8);
        }
    }

    #[test]
    fn round_trip_through_the_operator() {
        let lam = 0.48;
        let a = alpha_of(lam, N).unwrap();
        let r = grid(40_000);
        for p in [1.0 + a, 2.0 + a] {
            let h = RadialFunction::sample(r.clone(), |x| x.powf(p) * (1.0 + 0.3 * x)).unwrap();
            let red = reduction_of_order(&h, lam, N).unwrap();
            let back = apply_L(&red.v, lam, N).unwrap();
            for i in middle(r.len()) {
                let want = h.values()[i];
                assert!((back.values()[i] - want).abs() < 1e-4 * want.abs());
            }
        }
    }

    #[test]
    fn remainder_and_w_bounds() {
        let lam = 0.48;
        let a = alpha_of(lam, N).unwrap();
        let r = grid(800);
        // admissible source mixing both model terms
        let h = RadialFunction::sample(r.clone(), |x| x.powf(1.0 + a) - 2.0 * x.powf(2.0 + a))
            .unwrap();
        let red = reduction_of_order(&h, lam, N).unwrap();
        let window = |f: &RadialFunction| -> Vec<(f64, f64)> {
            f.r()
                .iter()
                .zip(f.values())
                .filter(|(x, _)| **x <= 0.01)
                .map(|(x, y)| (*x, y.abs()))
                .collect()
        };
        let sv = fit_exponent(&window(&red.v)).unwrap().slope;
        assert!(sv >= 1.0 + a - 0.05, "slope {sv}");
        let sw = fit_exponent(&window(&red.w)).unwrap().slope;
        assert!(sw >= 0.95, "slope {sw}");
        assert!(red.w.values()[0].abs() < 1e-4);
    }

    #[test]
    fn singular_source_is_rejected() {
        let a = alpha_of(1.0, N).unwrap();
        // τ^{n-2+α} H ~ τ^{-1.5}
        let h = RadialFunction::sample(grid(100), |x| x.powf(-2.5 - a)).unwrap();
        assert!(matches!(
            reduction_of_order(&h, 1.0, N),
            Err(GapError::Inapplicable(_))
        ));
    }

    #[test]
    fn leading_coefficient_examples() {
        let a = alpha_of(1.0, N).unwrap();
        let r = geometric_grid(1e-4, 1.0, 400);
        let exact = RadialFunction::sample(r.clone(), |x| 3.0 * x.powf(a)).unwrap();
        let fit = extract_leading(&exact, a).unwrap();
        assert!((fit.c1_tilde - 3.0).abs() < 1e-12);
        assert!(fit.remainder_max <= 1e-12);

        let mixed =
            RadialFunction::sample(r.clone(), |x| 3.0 * x.powf(a) + x.powf(1.0 + a)).unwrap();
        let fit = extract_leading(&mixed, a).unwrap();
        assert!((fit.c1_tilde - 3.0).abs() < 1e-3);
        let slope = fit.remainder_slope.unwrap();
        assert!((slope - (1.0 + a)).abs() < 0.05, "slope {slope}");

        let short = RadialFunction::sample(vec![0.05, 0.06, 0.07, 0.08, 0.5], |x| x).unwrap();
        assert!(matches!(extract_leading(&short, a), Err(GapError::Usage(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn indicial_identity(p in 0.1f64..3.0, lam in 0.0f64..2.0) {
            let r = grid(100_000);
            let u = RadialFunction::sample(r.clone(), |x| x.powf(p)).unwrap();
            let lu = apply_L(&u, lam, N).unwrap();
            let k = p * p + (N as f64 - 1.0) * p - lam;
            for i in middle(r.len()).step_by(97) {
                let want = k * r[i].powf(p);
                prop_assert!((lu.values()[i] - want).abs() <= 1e-6 * r[i].powf(p));
            }
        }

        #[test]
        fn operator_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
            let r = grid(300);
            let f = RadialFunction::sample(r.clone(), |x| x.powf(0.4)).unwrap();
            let g = RadialFunction::sample(r.clone(), |x| (1.0 + x).ln()).unwrap();
            let sum = RadialFunction::new(
                r.clone(),
                f.values().iter().zip(g.values()).map(|(a, b)| c1 * a + c2 * b).collect(),
            ).unwrap();
            let (lf, lg, ls) = (
                apply_L(&f, 0.5, N).unwrap(),
                apply_L(&g, 0.5, N).unwrap(),
                apply_L(&sum, 0.5, N).unwrap(),
            );
            for i in 0..r.len() {
                let want = c1 * lf.values()[i] + c2 * lg.values()[i];
                prop_assert!((ls.values()[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
        }
    }
}
