//! The reduced equation `div((ε + a(ξ)|x′|²)∇v) = ∂ᵢFⁱ + G` on a disk.
//!
//! Cell-centered finite volumes on a polar grid. The radial faces follow
//! `r = R sinh(κt)/sinh κ`, which is uniform near the origin and
//! geometric further out; no unknown sits at the origin. Cells are numbered
//! ring by ring, so the envelope Cholesky factor is one ring wide and
//! serves as the CG preconditioner.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::exponents::alpha_of;
use crate::geometry::{SphereGrid, Weight};
use crate::numerics::{pcg, CgOptions, CsrMatrix, SkylineCholesky, SymmetricBuilder};
use crate::radialode::RadialFunction;
use crate::spectral::{solve_spectrum, weighted_inner};

/// Polar cell grid over `B_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    radius: f64,
    stretch: f64,
    n_theta: usize,
    faces: Vec<f64>,
    centers: Vec<f64>,
}

impl DiskGrid {
    /// `n_r` rings with stretching `κ = stretch` (zero gives uniform rings).
    pub fn new(radius: f64, n_r: usize, n_theta: usize, stretch: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GapError::usage(format!("disk radius must be positive, got {radius}")));
        }
        if n_r < 4 {
            return Err(GapError::usage("disk grid needs at least 4 rings"));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(GapError::usage(format!(
                "angular count must be even and at least 8, got {n_theta}"
            )));
        }
        if !(stretch >= 0.0) || stretch > 200.0 {
            return Err(GapError::usage(format!("stretch {stretch} outside [0, 200]")));
        }
        let faces: Vec<f64> = (0..=n_r)
            .map(|i| {
                let t = i as f64 / n_r as f64;
                if i == n_r {
                    radius
                } else if stretch < 1e-8 {
                    radius * t
                } else {
                    radius * (stretch * t).sinh() / stretch.sinh()
                }
            })
            .collect();
        let centers = faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        Ok(DiskGrid {
            radius,
            stretch,
            n_theta,
            faces,
            centers,
        })
    }

    pub fn uniform(radius: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        Self::new(radius, n_r, n_theta, 0.0)
    }

    /// Stretching whose outer cells grow by `ratio` per ring.
    pub fn geometric(radius: f64, n_r: usize, n_theta: usize, ratio: f64) -> Result<Self> {
        if !(ratio >= 1.0) {
            return Err(GapError::usage(format!("cell ratio must be at least 1, got {ratio}")));
        }
        Self::new(radius, n_r, n_theta, n_r as f64 * ratio.ln())
    }

    /// Twice the rings and angles with the same stretching, so every old
    /// face is also a new face.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.radius, 2 * self.n_r(), 2 * self.n_theta, self.stretch)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn n_r(&self) -> usize {
        self.centers.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.theta(j)).collect()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j % self.n_theta
    }

    pub fn area(&self, i: usize) -> f64 {
        0.5 * (self.faces[i + 1].powi(2) - self.faces[i].powi(2)) * self.h_theta()
    }

    /// Ring whose center is closest to `rho`.
    pub fn nearest_ring(&self, rho: f64) -> Result<usize> {
        if !(rho > 0.0 && rho <= self.radius * (1.0 + 1e-12)) {
            return Err(GapError::usage(format!(
                "radius {rho} outside (0, {}]",
                self.radius
            )));
        }
        let k = self.centers.partition_point(|&c| c < rho);
        Ok(match k {
            0 => 0,
            k if k == self.n_r() => k - 1,
            k if rho - self.centers[k - 1] <= self.centers[k] - rho => k - 1,
            k => k,
        })
    }

    /// Number of ring centers below `rho`.
    pub fn rings_below(&self, rho: f64) -> usize {
        self.centers.partition_point(|&c| c < rho)
    }

    /// Cartesian coordinates of cell `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let (r, t) = (self.centers[i], self.theta(j));
        [r * t.cos(), r * t.sin()]
    }

    /// `a` at the angles of the grid and at the angular faces.
    fn weight_samples(&self, w: &Weight) -> (Vec<f64>, Vec<f64>) {
        let h = self.h_theta();
        let center = (0..self.n_theta).map(|j| w.eval_angle(j as f64 * h)).collect();
        let face = (0..self.n_theta)
            .map(|j| w.eval_angle((j as f64 + 0.5) * h))
            .collect();
        (center, face)
    }
}

/// Samples on a [`DiskGrid`], ring-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    /// Cartesian components of the divergence-form field `F`.
    pub f: Option<Vec<[f64; 2]>>,
    /// Zeroth-order source `G`.
    pub g: Option<Vec<f64>>,
}

impl Forcing {
    pub fn zero() -> Self {
        Forcing { f: None, g: None }
    }

    pub fn divergence(f: Vec<[f64; 2]>) -> Self {
        Forcing { f: Some(f), g: None }
    }

    pub fn source(g: Vec<f64>) -> Self {
        Forcing { f: None, g: Some(g) }
    }

    /// `F` sampled from a function of the cell position.
    pub fn divergence_from(grid: &DiskGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self::divergence(cells(grid).map(|(i, j)| f(grid.point(i, j))).collect())
    }

    pub fn source_from(grid: &DiskGrid, g: impl Fn([f64; 2]) -> f64) -> Self {
        Self::source(cells(grid).map(|(i, j)| g(grid.point(i, j))).collect())
    }

    pub fn is_zero(&self) -> bool {
        let f0 = self
            .f
            .as_ref()
            .map_or(true, |f| f.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        let g0 = self.g.as_ref().map_or(true, |g| g.iter().all(|&v| v == 0.0));
        f0 && g0
    }

    /// `|F|` per cell (zeros when absent).
    pub fn f_magnitude(&self, len: usize) -> Vec<f64> {
        match &self.f {
            Some(f) => f.iter().map(|v| v[0].hypot(v[1])).collect(),
            None => vec![0.0; len],
        }
    }

    fn check(&self, grid: &DiskGrid) -> Result<()> {
        let n = grid.len();
        let bad_f = self.f.as_ref().is_some_and(|f| {
            f.len() != n || f.iter().any(|v| !v[0].is_finite() || !v[1].is_finite())
        });
        let bad_g = self
            .g
            .as_ref()
            .is_some_and(|g| g.len() != n || g.iter().any(|v| !v.is_finite()));
        if bad_f || bad_g {
            return Err(GapError::usage(format!(
                "forcing must hold {n} finite samples per component"
            )));
        }
        Ok(())
    }

    fn sum(&self, other: &Forcing) -> Forcing {
        let f = match (&self.f, &other.f) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| [x[0] + y[0], x[1] + y[1]]).collect()),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        let g = match (&self.g, &other.g) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        Forcing { f, g }
    }
}

fn cells(grid: &DiskGrid) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..grid.n_r()).flat_map(move |i| (0..grid.n_theta()).map(move |j| (i, j)))
}

/// Symmetric five-point operator `−div(c∇·)` with the outer Dirichlet
/// coupling split off.
struct Operator {
    matrix: CsrMatrix,
    /// Coupling of the outer cell at angle `j` to the boundary value.
    boundary: Vec<f64>,
}

/// `c = eps + quad·a(θ)r²`.
fn assemble(grid: &DiskGrid, a: &[f64], a_face: &[f64], eps: f64, quad: f64) -> Operator {
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let h = grid.h_theta();
    let (rf, rc) = (grid.faces(), grid.centers());
    let coef = |r: f64, av: f64| eps + quad * av * r * r;
    let mut b = SymmetricBuilder::with_capacity(grid.len(), 6 * grid.len());
    for i in 0..nr {
        let dr = rf[i + 1] - rf[i];
        for j in 0..nt {
            let k = grid.index(i, j);
            b.add_edge(k, grid.index(i, j + 1), coef(rc[i], a_face[j]) * dr / (rc[i] * h));
            if i + 1 < nr {
                let t = coef(rf[i + 1], a[j]) * rf[i + 1] * h / (rc[i + 1] - rc[i]);
                b.add_edge(k, grid.index(i + 1, j), t);
            }
        }
    }
    let outer = grid.radius();
    let boundary: Vec<f64> = (0..nt)
        .map(|j| coef(outer, a[j]) * outer * h / (outer - rc[nr - 1]))
        .collect();
    for (j, t) in boundary.iter().enumerate() {
        b.add_diag(grid.index(nr - 1, j), *t);
    }
    Operator {
        matrix: b.build(),
        boundary,
    }
}

/// `Σ_faces F·n |face|` per cell, with `F` interpolated to the faces.
fn divergence_flux(grid: &DiskGrid, f: &[[f64; 2]]) -> Vec<f64> {
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let h = grid.h_theta();
    let (rf, rc) = (grid.faces(), grid.centers());
    let radial = |i: usize, j: usize| {
        let t = grid.theta(j);
        let v = f[grid.index(i, j)];
        v[0] * t.cos() + v[1] * t.sin()
    };
    let mut out = vec![0.0; grid.len()];
    for i in 0..nr {
        for j in 0..nt {
            // radial face between rings i and i+1 (extrapolated at the rim)
            let (lo, hi) = if i + 1 < nr { (i, i + 1) } else { (i - 1, i) };
            let s = (rf[i + 1] - rc[lo]) / (rc[hi] - rc[lo]);
            let fr = (1.0 - s) * radial(lo, j) + s * radial(hi, j);
            let flux = fr * rf[i + 1] * h;
            out[grid.index(i, j)] += flux;
            if i + 1 < nr {
                out[grid.index(i + 1, j)] -= flux;
            }
            // angular face between j and j+1
            let tf = (j as f64 + 0.5) * h;
            let (p, q) = (f[grid.index(i, j)], f[grid.index(i, j + 1)]);
            let ft = 0.5 * ((p[1] + q[1]) * tf.cos() - (p[0] + q[0]) * tf.sin());
            let flux = ft * (rf[i + 1] - rf[i]);
            out[grid.index(i, j)] += flux;
            out[grid.index(i, j + 1)] -= flux;
        }
    }
    out
}

/// Scalar field on a [`DiskGrid`] together with the problem data it solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskField {
    pub grid: DiskGrid,
    /// Ring-major cell values.
    pub values: Vec<f64>,
    pub epsilon: f64,
    /// Weight sampled on the field's angular grid.
    pub weight: Weight,
    /// `a`-weighted mean of the innermost ring, standing in for `v(0′)`.
    pub center_value: f64,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

impl DiskField {
    pub(crate) fn from_values(grid: DiskGrid, values: Vec<f64>, epsilon: f64, weight: Weight, residual: f64) -> Self {
        let mut field = DiskField {
            grid,
            values,
            epsilon,
            weight,
            center_value: 0.0,
            residual,
        };
        field.center_value = field.ring_mean(0);
        field
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let nt = self.grid.n_theta();
        &self.values[i * nt..(i + 1) * nt]
    }

    /// `Σ_j a_j v_ij / Σ_j a_j`.
    pub fn ring_mean(&self, i: usize) -> f64 {
        let a = self.weight.samples();
        let num: f64 = a.iter().zip(self.ring(i)).map(|(a, v)| a * v).sum();
        num / a.iter().sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|∇v|` at cell `(i, j)` from centered differences; needs
    /// `0 < i < n_r − 1`.
    pub fn gradient_norm(&self, i: usize, j: usize) -> f64 {
        let rc = self.grid.centers();
        let (x0, x1, x2) = (rc[i - 1], rc[i], rc[i + 1]);
        let w0 = -(x2 - x1) / ((x1 - x0) * (x2 - x0));
        let w2 = (x1 - x0) / ((x2 - x1) * (x2 - x0));
        let w1 = -w0 - w2;
        let vr = w0 * self.value(i - 1, j) + w1 * self.value(i, j) + w2 * self.value(i + 1, j);
        let nt = self.grid.n_theta();
        let vt = (self.value(i, (j + 1) % nt) - self.value(i, (j + nt - 1) % nt))
            / (2.0 * self.grid.h_theta() * x1);
        vr.hypot(vt)
    }

    /// Largest `|∇v|` on rings `first..n_r − 2`, with its ring and angle index.
    /// The innermost ring and the two rings at the rim are skipped.
    pub fn max_gradient_in(&self, rings: std::ops::Range<usize>) -> (f64, usize, usize) {
        let lo = rings.start.max(1);
        let hi = rings.end.min(self.grid.n_r().saturating_sub(2));
        let mut best = (0.0, lo, 0);
        for i in lo..hi {
            for j in 0..self.grid.n_theta() {
                let g = self.gradient_norm(i, j);
                if g > best.0 {
                    best = (g, i, j);
                }
            }
        }
        best
    }

    pub fn max_gradient(&self) -> (f64, usize, usize) {
        self.max_gradient_in(1..self.grid.n_r())
    }

    /// Field at radius `r` and angle index `j`, linear between ring centers.
    pub fn interpolate(&self, r: f64, j: usize) -> f64 {
        let rc = self.grid.centers();
        let k = rc.partition_point(|&c| c < r).clamp(1, rc.len() - 1);
        let s = (r - rc[k - 1]) / (rc[k] - rc[k - 1]);
        (1.0 - s) * self.value(k - 1, j) + s * self.value(k, j)
    }

    /// `ω` on every ring.
    pub fn omega_profile(&self) -> RadialProfile {
        let values = (0..self.grid.n_r()).map(|i| self.ring_omega(i)).collect();
        RadialProfile {
            rho: self.grid.centers().to_vec(),
            values,
        }
    }

    fn ring_omega(&self, i: usize) -> f64 {
        let a = self.weight.samples();
        let n = a.len() as f64;
        a.iter()
            .zip(self.ring(i))
            .map(|(a, v)| a * (v - self.center_value).powi(2) / n)
            .sum::<f64>()
            .sqrt()
    }
}

/// Values against ascending radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(rho: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if rho.len() != values.len() {
            return Err(GapError::usage("profile radii and values differ in length"));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) || rho.first().is_some_and(|&r| !(r > 0.0)) {
            return Err(GapError::usage("profile radii must be positive and increasing"));
        }
        Ok(RadialProfile { rho, values })
    }

    /// Points with `lo ≤ ρ ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.rho
            .iter()
            .zip(&self.values)
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(r, v)| (*r, *v))
            .collect()
    }

    pub fn to_radial_function(&self) -> Result<RadialFunction> {
        RadialFunction::new(self.rho.clone(), self.values.clone())
    }
}

fn circle_weight(w: &Weight, grid: &DiskGrid) -> Result<Weight> {
    match w.grid() {
        SphereGrid::Circle { n_theta } if n_theta == grid.n_theta() => Ok(w.clone()),
        SphereGrid::Circle { .. } => w.resampled(SphereGrid::Circle {
            n_theta: grid.n_theta(),
        }),
        SphereGrid::LatLong { .. } => Err(GapError::usage(
            "the reduced solver handles the two-dimensional disk only",
        )),
    }
}

/// Relative CG tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-10;

pub fn solve_reduced(
    w: &Weight,
    eps: f64,
    grid: &DiskGrid,
    boundary: &[f64],
    forcing: &Forcing,
    tol: f64,
) -> Result<DiskField> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(GapError::usage(format!("epsilon must be nonnegative, got {eps}")));
    }
    if boundary.len() != grid.n_theta() || boundary.iter().any(|v| !v.is_finite()) {
        return Err(GapError::usage(format!(
            "boundary data needs {} finite samples, got {}",
            grid.n_theta(),
            boundary.len()
        )));
    }
    forcing.check(grid)?;
    if eps == 0.0 && !forcing.is_zero() {
        return Err(GapError::usage("the eps = 0 problem is only solved without forcing"));
    }
    let weight = circle_weight(w, grid)?;
    let (a, a_face) = grid.weight_samples(&weight);
    let op = assemble(grid, &a, &a_face, eps, 1.0);
    let mut rhs = vec![0.0; grid.len()];
    let last = grid.n_r() - 1;
    for (j, (t, g)) in op.boundary.iter().zip(boundary).enumerate() {
        rhs[grid.index(last, j)] += t * g;
    }
    if let Some(f) = &forcing.f {
        for (r, d) in rhs.iter_mut().zip(divergence_flux(grid, f)) {
            *r -= d;
        }
    }
    if let Some(g) = &forcing.g {
        for (k, r) in rhs.iter_mut().enumerate() {
            *r -= g[k] * grid.area(k / grid.n_theta());
        }
    }
    let (values, residual) = solve_spd(&op.matrix, &rhs, tol)?;
    Ok(DiskField::from_values(grid.clone(), values, eps, weight, residual))
}

fn solve_spd(a: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let factor = SkylineCholesky::factor(a)?;
    let out = pcg(a, rhs, None, &factor, CgOptions::with_tol(tol))?;
    log::debug!(
        "reduced solve: {} cells, {} CG steps, residual {:.2e}",
        a.dim(),
        out.iterations,
        out.residual
    );
    Ok((out.x, out.residual))
}

/// `U(ρ_i) = ⨍ a (v(ρ_i,·) − v(0′)) Y` on every ring.
pub fn project_mode(field: &DiskField, y: &[f64]) -> Result<RadialProfile> {
    if y.len() != field.grid.n_theta() {
        return Err(GapError::usage(format!(
            "mode has {} samples, field rings have {}",
            y.len(),
            field.grid.n_theta()
        )));
    }
    let values = (0..field.grid.n_r())
        .map(|i| {
            let centered: Vec<f64> = field.ring(i).iter().map(|v| v - field.center_value).collect();
            weighted_inner(&centered, y, &field.weight)
        })
        .collect::<Result<Vec<_>>>()?;
    RadialProfile::new(field.grid.centers().to_vec(), values)
}

/// `ω(ρ) = (⨍_{∂B_ρ} a|v − v(0′)|²)^{1/2}` on the ring nearest `rho`.
pub fn mode_norm(field: &DiskField, rho: f64) -> Result<f64> {
    Ok(field.ring_omega(field.grid.nearest_ring(rho)?))
}

/// `sup |F| / (|x′|^σ (ε + a|x′|²)^{1−s})` over the cells.
pub fn weighted_norm(
    grid: &DiskGrid,
    w: &Weight,
    values: &[f64],
    eps: f64,
    sigma: f64,
    s: f64,
) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(GapError::usage("field does not match the grid"));
    }
    let weight = circle_weight(w, grid)?;
    let a = weight.samples();
    let mut sup = 0.0_f64;
    for (i, j) in cells(grid) {
        let r = grid.centers()[i];
        let den = r.powf(sigma) * (eps + a[j] * r * r).powf(1.0 - s);
        let v = values[grid.index(i, j)].abs() / den;
        if !v.is_finite() {
            return Err(GapError::Numerical {
                message: format!("weighted norm is not finite at ring {i}"),
                residual: v,
            });
        }
        sup = sup.max(v);
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub epsilon: f64,
    /// `max (α̃−α)|Mx|²/(ε + a|x|²)`, required to stay below `½ tr M`.
    pub precondition: f64,
    /// `min L_εψ / (ε + a|x|²)^{(α−α̃)/2}` over the cells.
    pub min_ratio: f64,
    /// Continuum lower bound `½ tr M (α̃ − α)`.
    pub bound: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Applies the discrete operator to `ψ = −(ε + a|x′|²)^{(α−α̃)/2}`.
pub fn barrier_check(w: &Weight, eps: f64, alpha_tilde: f64, grid: &DiskGrid) -> Result<BarrierReport> {
    if !(eps >= 0.0) {
        return Err(GapError::usage(format!("epsilon must be nonnegative, got {eps}")));
    }
    let basis = solve_spectrum(w, 4)?;
    let alpha = alpha_of(basis.lambda1()?, w.n())?;
    if !(alpha_tilde > alpha && alpha_tilde < 1.0) {
        return Err(GapError::usage(format!(
            "alpha_tilde = {alpha_tilde} must lie in ({alpha:.6}, 1)"
        )));
    }
    let weight = circle_weight(w, grid)?;
    let m = weight.matrix();
    let tr = weight.trace();
    let d = alpha_tilde - alpha;
    let q = -0.5 * d;
    let phi = |x: [f64; 2]| eps + weight.eval(&x);
    let mut pre = 0.0_f64;
    let mut check = |x: [f64; 2]| {
        let mx = [m[0] * x[0] + m[1] * x[1], m[2] * x[0] + m[3] * x[1]];
        pre = pre.max(d * (mx[0] * mx[0] + mx[1] * mx[1]) / phi(x));
    };
    for (i, j) in cells(grid) {
        check(grid.point(i, j));
    }
    for j in 0..grid.n_theta() {
        let t = grid.theta(j);
        check([grid.radius() * t.cos(), grid.radius() * t.sin()]);
    }
    if pre > 0.5 * tr {
        return Err(GapError::Inapplicable(format!(
            "barrier needs (α̃−α)|Mx|²/Φ ≤ tr M/2, found {pre:.4} > {:.4}",
            0.5 * tr
        )));
    }
    let (a, a_face) = grid.weight_samples(&weight);
    let op = assemble(grid, &a, &a_face, eps, 1.0);
    let psi: Vec<f64> = cells(grid).map(|(i, j)| -phi(grid.point(i, j)).powf(q)).collect();
    let mut l = op.matrix.mul_vec(&psi);
    let last = grid.n_r() - 1;
    for j in 0..grid.n_theta() {
        let t = grid.theta(j);
        let edge = -phi([grid.radius() * t.cos(), grid.radius() * t.sin()]).powf(q);
        l[grid.index(last, j)] -= op.boundary[j] * edge;
    }
    let min_ratio = cells(grid)
        .map(|(i, j)| {
            let k = grid.index(i, j);
            -l[k] / grid.area(i) / phi(grid.point(i, j)).powf(q)
        })
        .fold(f64::INFINITY, f64::min);
    let bound = 0.5 * tr * d;
    let threshold = 0.5 * bound;
    Ok(BarrierReport {
        alpha,
        alpha_tilde,
        epsilon: eps,
        precondition: pre,
        min_ratio,
        bound,
        threshold,
        pass: min_ratio >= threshold,
    })
}

/// Forcing split into the three pieces carried by `v₃`, `v₄` and `v₅`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSplit {
    pub g: Forcing,
    pub f1: Forcing,
    pub f2: Forcing,
}

impl ForcingSplit {
    pub fn zero() -> Self {
        ForcingSplit {
            g: Forcing::zero(),
            f1: Forcing::zero(),
            f2: Forcing::zero(),
        }
    }

    pub fn total(&self) -> Forcing {
        self.g.sum(&self.f1).sum(&self.f2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    /// `v₁ … v₅`.
    pub parts: Vec<DiskField>,
    /// Direct solve of the full problem.
    pub total: DiskField,
    pub sup_norms: Vec<f64>,
    /// `max |Σ v_k − v̄| / max |v̄|`.
    pub sum_error: f64,
}

/// `v₁` solves the `ε = 0` problem with the boundary data, `v₂` the
/// correction `L_ε v₂ = −εΔv₁`, and `v₃, v₄, v₅` carry `G`, `div F₁`,
/// `div F₂` with zero boundary data.
pub fn decompose_five(
    w: &Weight,
    eps: f64,
    grid: &DiskGrid,
    boundary: &[f64],
    split: &ForcingSplit,
    tol: f64,
) -> Result<Decomposition> {
    for part in [&split.g, &split.f1, &split.f2] {
        part.check(grid)?;
    }
    if split.g.f.is_some() || split.f1.g.is_some() || split.f2.g.is_some() {
        return Err(GapError::usage(
            "the G part must be a pure source and the F parts pure divergences",
        ));
    }
    let zero = vec![0.0; grid.n_theta()];
    let v1 = solve_reduced(w, 0.0, grid, boundary, &Forcing::zero(), tol)?;
    // −εΔ_h v₁ with the boundary data of v₁
    let weight = circle_weight(w, grid)?;
    let lap = assemble(grid, weight.samples(), weight.samples(), 1.0, 0.0);
    let mut kv = lap.matrix.mul_vec(&v1.values);
    let last = grid.n_r() - 1;
    for (j, (t, g)) in lap.boundary.iter().zip(boundary).enumerate() {
        kv[grid.index(last, j)] -= t * g;
    }
    let g2: Vec<f64> = kv
        .iter()
        .enumerate()
        .map(|(k, v)| eps * v / grid.area(k / grid.n_theta()))
        .collect();
    let v2 = solve_reduced(w, eps, grid, &zero, &Forcing::source(g2), tol)?;
    let v3 = solve_reduced(w, eps, grid, &zero, &split.g, tol)?;
    let v4 = solve_reduced(w, eps, grid, &zero, &split.f1, tol)?;
    let v5 = solve_reduced(w, eps, grid, &zero, &split.f2, tol)?;
    let total = solve_reduced(w, eps, grid, boundary, &split.total(), tol)?;
    let parts = vec![v1, v2, v3, v4, v5];
    let scale = total.sup_norm().max(f64::MIN_POSITIVE);
    let sum_error = (0..grid.len())
        .map(|k| (parts.iter().map(|p| p.values[k]).sum::<f64>() - total.values[k]).abs())
        .fold(0.0, f64::max)
        / scale;
    Ok(Decomposition {
        sup_norms: parts.iter().map(DiskField::sup_norm).collect(),
        parts,
        total,
        sum_error,
    })
}
