//! The inclusion-pair neck and the weight `a(ξ) = ξᵗMξ` on the unit sphere.
//!
//! The upper wall is `x_n = ε + f(x′)` and the lower wall is `x_n = g(x′)`,
//! with `f − g = x′ᵗMx′ + c₄|x′|⁴` split between the two walls by `f_share`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::numerics::quadrature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapGeometry {
    n: usize,
    epsilon: f64,
    /// Row-major `(n−1)×(n−1)` symmetric matrix.
    hessian: Vec<f64>,
    quartic_coeff: f64,
    f_share: f64,
    r0: f64,
    gamma: f64,
}

impl GapGeometry {
    pub fn new(
        n: usize,
        epsilon: f64,
        hessian: Vec<f64>,
        quartic_coeff: f64,
        f_share: f64,
        r0: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(GapError::usage(format!("dimension n = {n} must be at least 2")));
        }
        let m = n - 1;
        if hessian.len() != m * m {
            return Err(GapError::Geometry(format!(
                "Hessian has {} entries, expected {}",
                hessian.len(),
                m * m
            )));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(GapError::Geometry(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(r0 > 0.0 && r0 <= 1.0) {
            return Err(GapError::Geometry(format!("R0 must lie in (0, 1], got {r0}")));
        }
        if !(0.0..=1.0).contains(&f_share) {
            return Err(GapError::Geometry(format!("f_share must lie in [0, 1], got {f_share}")));
        }
        let (lo, _) = symmetric_extremes(m, &hessian)?;
        if !(lo > 0.0) {
            return Err(GapError::Geometry(format!(
                "Hessian must be positive definite (smallest eigenvalue {lo:.3e})"
            )));
        }
        if quartic_coeff < -lo / (8.0 * r0 * r0) || !quartic_coeff.is_finite() {
            return Err(GapError::Geometry(format!(
                "quartic coefficient {quartic_coeff} would let the walls touch inside 2R0"
            )));
        }
        Ok(GapGeometry {
            n,
            epsilon,
            hessian,
            quartic_coeff,
            f_share,
            r0,
            gamma: 1.0,
        })
    }

    /// `M = I`, no quartic term, symmetric split, `R₀ = 1`.
    pub fn ball(n: usize, epsilon: f64) -> Result<Self> {
        let m = n.saturating_sub(1);
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            h[i * m + i] = 1.0;
        }
        Self::new(n, epsilon, h, 0.0, 0.5, 1.0)
    }

    /// Diagonal Hessian with the given entries.
    pub fn diagonal(epsilon: f64, diag: &[f64]) -> Result<Self> {
        let m = diag.len();
        let mut h = vec![0.0; m * m];
        for (i, d) in diag.iter().enumerate() {
            h[i * m + i] = *d;
        }
        Self::new(m + 1, epsilon, h, 0.0, 0.5, 1.0)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.n,
            epsilon,
            self.hessian.clone(),
            self.quartic_coeff,
            self.f_share,
            self.r0,
        )
    }

    pub fn with_quartic(&self, c4: f64) -> Result<Self> {
        Self::new(self.n, self.epsilon, self.hessian.clone(), c4, self.f_share, self.r0)
    }

    pub fn with_f_share(&self, share: f64) -> Result<Self> {
        Self::new(self.n, self.epsilon, self.hessian.clone(), self.quartic_coeff, share, self.r0)
    }

    pub fn with_r0(&self, r0: f64) -> Result<Self> {
        Self::new(self.n, self.epsilon, self.hessian.clone(), self.quartic_coeff, self.f_share, r0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn hessian(&self) -> &[f64] {
        &self.hessian
    }

    pub fn quartic_coeff(&self) -> f64 {
        self.quartic_coeff
    }

    pub fn f_share(&self) -> f64 {
        self.f_share
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn min_eig(&self) -> f64 {
        symmetric_extremes(self.n - 1, &self.hessian).map(|e| e.0).unwrap_or(f64::NAN)
    }

    pub fn max_eig(&self) -> f64 {
        symmetric_extremes(self.n - 1, &self.hessian).map(|e| e.1).unwrap_or(f64::NAN)
    }

    /// `x′ᵗ M x′`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        quad_form(&self.hessian, x)
    }

    /// `f − g` at `x′`.
    pub fn height(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.quadratic(x) + self.quartic_coeff * r2 * r2
    }

    /// Gradient of `f − g`.
    pub fn height_grad(&self, x: &[f64]) -> Vec<f64> {
        let m = self.n - 1;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (0..m)
            .map(|i| {
                let mx: f64 = (0..m).map(|j| self.hessian[i * m + j] * x[j]).sum();
                2.0 * mx + 4.0 * self.quartic_coeff * r2 * x[i]
            })
            .collect()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.f_share * self.height(x)
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        -(1.0 - self.f_share) * self.height(x)
    }

    pub fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        self.height_grad(x).into_iter().map(|v| self.f_share * v).collect()
    }

    pub fn grad_g(&self, x: &[f64]) -> Vec<f64> {
        self.height_grad(x)
            .into_iter()
            .map(|v| -(1.0 - self.f_share) * v)
            .collect()
    }

    /// Vertical gap `δ(x′) = ε + f(x′) − g(x′)` for `|x′| ≤ 2R₀`.
    pub fn gap_width(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n - 1 {
            return Err(GapError::usage(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.n - 1
            )));
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 2.0 * self.r0 * (1.0 + 1e-12) {
            return Err(GapError::Geometry(format!(
                "|x'| = {r} lies outside the neck radius 2R0 = {}",
                2.0 * self.r0
            )));
        }
        Ok(self.epsilon + self.height(x))
    }
}

fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += x[i] * m[i * d + j] * x[j];
        }
    }
    s
}

/// Smallest and largest eigenvalue of a symmetric row-major matrix.
pub(crate) fn symmetric_extremes(m: usize, data: &[f64]) -> Result<(f64, f64)> {
    if data.len() != m * m {
        return Err(GapError::usage("matrix data has the wrong size"));
    }
    for i in 0..m {
        for j in 0..i {
            let (a, b) = (data[i * m + j], data[j * m + i]);
            if (a - b).abs() > 1e-14 * (a.abs() + b.abs()).max(1.0) {
                return Err(GapError::Geometry(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, data));
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Sample layout of a [`Weight`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphereGrid {
    /// `θ_j = 2πj/N` on the unit circle.
    Circle { n_theta: usize },
    /// Cell centers `φ_p = (p+½)π/N_φ`, `θ_q = 2πq/N_θ`, colatitude-major.
    LatLong { n_phi: usize, n_theta: usize },
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        match *self {
            SphereGrid::Circle { n_theta } => n_theta,
            SphereGrid::LatLong { n_phi, n_theta } => n_phi * n_theta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ambient dimension of the sphere's points.
    pub fn ambient_dim(&self) -> usize {
        match self {
            SphereGrid::Circle { .. } => 2,
            SphereGrid::LatLong { .. } => 3,
        }
    }

    /// Unit vector of sample `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match *self {
            SphereGrid::Circle { n_theta } => {
                let t = 2.0 * PI * k as f64 / n_theta as f64;
                vec![t.cos(), t.sin()]
            }
            SphereGrid::LatLong { n_phi, n_theta } => {
                let (p, q) = (k / n_theta, k % n_theta);
                let phi = (p as f64 + 0.5) * PI / n_phi as f64;
                let th = 2.0 * PI * q as f64 / n_theta as f64;
                vec![phi.sin() * th.cos(), phi.sin() * th.sin(), phi.cos()]
            }
        }
    }

    /// Normalized quadrature weights (they sum to one).
    pub fn quadrature(&self) -> Vec<f64> {
        match *self {
            SphereGrid::Circle { n_theta } => quadrature::periodic_weights(n_theta),
            SphereGrid::LatLong { n_phi, n_theta } => quadrature::latlong_weights(n_phi, n_theta),
        }
    }
}

/// `a(ξ) = ξᵗMξ` sampled on a sphere grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    grid: SphereGrid,
    matrix: Vec<f64>,
    samples: Vec<f64>,
    quadrature: Vec<f64>,
}

impl Weight {
    /// Samples the quadratic form of a symmetric positive definite `M`
    /// (`2×2` for the circle, `3×3` for the sphere).
    pub fn from_matrix(matrix: Vec<f64>, grid: SphereGrid) -> Result<Self> {
        let d = grid.ambient_dim();
        let (lo, _) = symmetric_extremes(d, &matrix)?;
        if !(lo > 0.0) {
            return Err(GapError::Geometry(format!(
                "weight matrix must be positive definite (smallest eigenvalue {lo:.3e})"
            )));
        }
        match grid {
            SphereGrid::Circle { n_theta } if n_theta < 3 => {
                return Err(GapError::usage("circle grid needs at least 3 points"))
            }
            SphereGrid::LatLong { n_phi, n_theta } if n_phi < 2 || n_theta < 3 => {
                return Err(GapError::usage("sphere grid too coarse"))
            }
            _ => {}
        }
        let samples = (0..grid.len())
            .map(|k| quad_form(&matrix, &grid.point(k)))
            .collect();
        Ok(Weight {
            grid,
            quadrature: grid.quadrature(),
            matrix,
            samples,
        })
    }

    /// Same form resampled on another grid of the same sphere.
    pub fn resampled(&self, grid: SphereGrid) -> Result<Self> {
        if grid.ambient_dim() != self.grid.ambient_dim() {
            return Err(GapError::usage("cannot resample a weight onto another sphere"));
        }
        Self::from_matrix(self.matrix.clone(), grid)
    }

    pub fn grid(&self) -> SphereGrid {
        self.grid
    }

    /// Dimension `n` of the ambient problem (sphere is `S^{n−2}`).
    pub fn n(&self) -> usize {
        self.grid.ambient_dim() + 1
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `a` at an arbitrary point of the ambient space.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        quad_form(&self.matrix, xi)
    }

    /// `a(cos θ, sin θ)`; only meaningful on the circle.
    pub fn eval_angle(&self, theta: f64) -> f64 {
        let m = &self.matrix;
        let (c, s) = (theta.cos(), theta.sin());
        m[0] * c * c + (m[1] + m[2]) * c * s + m[3] * s * s
    }

    /// `a` at colatitude `φ`, longitude `θ`; only meaningful on `S²`.
    pub fn eval_sphere(&self, phi: f64, theta: f64) -> f64 {
        self.eval(&[phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()])
    }

    pub fn min_eig(&self) -> f64 {
        symmetric_extremes(self.grid.ambient_dim(), &self.matrix)
            .map(|e| e.0)
            .unwrap_or(f64::NAN)
    }

    pub fn max_eig(&self) -> f64 {
        symmetric_extremes(self.grid.ambient_dim(), &self.matrix)
            .map(|e| e.1)
            .unwrap_or(f64::NAN)
    }

    /// `Σ a^{ii}`.
    pub fn trace(&self) -> f64 {
        let d = self.grid.ambient_dim();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }

    /// Weight of `cM`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(self.matrix.iter().map(|v| c * v).collect(), self.grid)
    }
}

/// Samples `a` for the geometry on a circle (`n = 3`, `N` points) or on a
/// `N/2 × N` latitude–longitude grid (`n = 4`).
pub fn build_weight(geom: &GapGeometry, grid_size: usize) -> Result<Weight> {
    if grid_size < 16 || grid_size % 2 != 0 {
        return Err(GapError::usage(format!(
            "grid size must be even and at least 16, got {grid_size}"
        )));
    }
    let grid = match geom.n() {
        3 => SphereGrid::Circle { n_theta: grid_size },
        4 => SphereGrid::LatLong {
            n_phi: grid_size / 2,
            n_theta: grid_size,
        },
        n => {
            return Err(GapError::usage(format!(
                "weights are supported for n = 3 and n = 4, not n = {n}"
            )))
        }
    };
    Weight::from_matrix(geom.hessian().to_vec(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn aniso() -> GapGeometry {
        GapGeometry::diagonal(1e-3, &[1.0, 4.0]).unwrap()
    }

    #[test]
    fn identity_weight_is_one() {
        let w = build_weight(&GapGeometry::ball(3, 0.1).unwrap(), 32).unwrap();
        assert!(w.samples().iter().all(|&a| (a - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_weight_samples() {
        let w = build_weight(&aniso(), 16).unwrap();
        assert!((w.samples()[0] - 1.0).abs() < 1e-15);
        assert!((w.samples()[4] - 4.0).abs() < 1e-14);
        assert!((w.samples()[2] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn off_diagonal_weight_peaks_on_eigenvector() {
        let g = GapGeometry::new(3, 0.1, vec![2.0, 1.0, 1.0, 2.0], 0.0, 0.5, 1.0).unwrap();
        let w = build_weight(&g, 16).unwrap();
        assert!((w.samples()[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_weight_is_bounded_by_eigenvalues() {
        let g = GapGeometry::new(
            4,
            0.1,
            vec![1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 3.0],
            0.0,
            0.5,
            1.0,
        )
        .unwrap();
        let w = build_weight(&g, 32).unwrap();
        assert_eq!(w.len(), 16 * 32);
        let (lo, hi) = (w.min_eig(), w.max_eig());
        assert!(w.samples().iter().all(|&a| a >= lo - 1e-14 && a <= hi + 1e-14));
    }

    #[test]
    fn weight_is_even() {
        let g = GapGeometry::new(3, 0.1, vec![2.0, 0.7, 0.7, 1.0], 0.0, 0.5, 1.0).unwrap();
        let w = build_weight(&g, 64).unwrap();
        let s = w.samples();
        for j in 0..64 {
            assert!((s[j] - s[(j + 32) % 64]).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            GapGeometry::new(3, 0.1, vec![1.0, 0.0, 0.0, -1.0], 0.0, 0.5, 1.0),
            Err(GapError::Geometry(_))
        ));
        assert!(matches!(build_weight(&aniso(), 15), Err(GapError::Usage(_))));
        let g5 = GapGeometry::ball(5, 0.1).unwrap();
        assert!(matches!(build_weight(&g5, 32), Err(GapError::Usage(_))));
        // quartic term strong enough to close the gap
        assert!(aniso().with_quartic(-0.2).is_err());
        assert!(aniso().with_quartic(-0.1).is_ok());
    }

    #[test]
    fn gap_width_examples() {
        let g = aniso();
        assert_eq!(g.gap_width(&[0.0, 0.0]).unwrap(), 1e-3);
        let ball = GapGeometry::ball(3, 0.01).unwrap();
        let r = 0.3_f64;
        let x = [r * 0.6, r * 0.8];
        assert!((ball.gap_width(&x).unwrap() - (0.01 + r * r)).abs() < 1e-15);
        let q = aniso().with_quartic(0.1).unwrap();
        assert!((q.gap_width(&[0.1, 0.0]).unwrap() - (1e-3 + 0.01001)).abs() < 1e-15);
        assert!(matches!(q.gap_width(&[2.1, 0.0]), Err(GapError::Geometry(_))));
    }

    #[test]
    fn walls_split_the_height() {
        let g = aniso().with_quartic(0.05).unwrap().with_f_share(0.3).unwrap();
        let x = [0.2, -0.1];
        assert!((g.f(&x) - g.g(&x) - g.height(&x)).abs() < 1e-16);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (g.f(&xp) - g.f(&xm)) / (2.0 * h);
            assert!((fd - g.grad_f(&x)[i]).abs() < 1e-8);
            let fd = (g.g(&xp) - g.g(&xm)) / (2.0 * h);
            assert!((fd - g.grad_g(&x)[i]).abs() < 1e-8);
        }
    }

    fn rotation_matrix(phi: f64) -> [f64; 4] {
        [phi.cos(), -phi.sin(), phi.sin(), phi.cos()]
    }

    proptest! {
        #[test]
        fn rotation_shifts_the_circle_weight(
            m11 in 0.2f64..5.0, m22 in 0.2f64..5.0, m12 in -0.1f64..0.1, shift in 0usize..64
        ) {
            let n = 64;
            let m = vec![m11, m12, m12, m22];
            let phi = 2.0 * PI * shift as f64 / n as f64;
            let r = rotation_matrix(phi);
            // Rᵗ M R
            let mut rot = vec![0.0; 4];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            rot[i * 2 + j] += r[k * 2 + i] * m[k * 2 + l] * r[l * 2 + j];
                        }
                    }
                }
            }
            rot[1] = 0.5 * (rot[1] + rot[2]);
            rot[2] = rot[1];
            let grid = SphereGrid::Circle { n_theta: n };
            let a = Weight::from_matrix(m, grid).unwrap();
            let b = Weight::from_matrix(rot, grid).unwrap();
            for j in 0..n {
                let want = a.samples()[(j + shift) % n];
                prop_assert!((b.samples()[j] - want).abs() < 1e-12 * want.max(1.0));
            }
        }

        #[test]
        fn scaling_is_exact(c in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0, 8.0]),
                            m11 in 0.2f64..5.0, m22 in 0.2f64..5.0) {
            let grid = SphereGrid::Circle { n_theta: 32 };
            let a = Weight::from_matrix(vec![m11, 0.0, 0.0, m22], grid).unwrap();
            let b = a.scaled(c).unwrap();
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert_eq!(c * x, *y);
            }
        }

        #[test]
        fn gap_width_is_quadratic_at_origin(
            x1 in -1.0f64..1.0, x2 in -1.0f64..1.0, c4 in 0.0f64..2.0
        ) {
            prop_assume!(x1.abs() + x2.abs() > 0.1);
            let g = aniso().with_quartic(c4).unwrap();
            let d = |t: f64| g.gap_width(&[t * x1, t * x2]).unwrap() - g.epsilon();
            let t = 1e-2;
            let s1 = (d(t) / d(t / 2.0)).log2();
            let s2 = (d(t / 2.0) / d(t / 4.0)).log2();
            // the O(t²) correction cancels in the extrapolated slope
            let slope = (4.0 * s2 - s1) / 3.0;
            prop_assert!((slope - 2.0).abs() < 1e-6);
        }
    }
}
