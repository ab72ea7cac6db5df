//! The weighted eigenproblem `−div_S(a∇u) = λ a u` on `S¹` and `S²`.
//!
//! Stiffness and mass come from a conservative flux discretization with the
//! weight sampled at face midpoints, so the pencil is symmetric and the
//! Rayleigh quotient of any grid function is `uᵗKu / uᵗBu` exactly.
//! Inner products are averages over the sphere.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::{SphereGrid, Weight};
use crate::numerics::{
    sym_gen_eig_with, CsrMatrix, EigenMethod, EigenProblemPair, SparseSystem, SymmetricBuilder,
};

/// Eigenvalues at or below this are treated as the constant mode.
pub const ZERO_MODE_TOL: f64 = 1e-8;

/// Relative gap below which eigenvalues always share an eigenspace.
pub const CLUSTER_REL_TOL: f64 = 1e-7;

/// Relative asymmetry threshold used by parity tags.
pub const PARITY_TOL: f64 = 1e-6;

/// Stiffness and mass of the weighted Laplace–Beltrami pencil.
pub fn assemble(w: &Weight) -> Result<EigenProblemPair> {
    let (k, m) = match w.grid() {
        SphereGrid::Circle { n_theta } => assemble_circle(w, n_theta),
        SphereGrid::LatLong { n_phi, n_theta } => assemble_sphere(w, n_phi, n_theta),
    };
    EigenProblemPair::new(SparseSystem::spsd(k)?, SparseSystem::spd(m)?)
}

fn assemble_circle(w: &Weight, n: usize) -> (CsrMatrix, CsrMatrix) {
    let h = 2.0 * PI / n as f64;
    let mut b = SymmetricBuilder::with_capacity(n, 4 * n);
    for j in 0..n {
        let face = w.eval_angle((j as f64 + 0.5) * h);
        b.add_edge(j, (j + 1) % n, face / (h * h * n as f64));
    }
    let mass: Vec<f64> = w.samples().iter().map(|a| a / n as f64).collect();
    (b.build(), CsrMatrix::from_diagonal(&mass))
}

fn assemble_sphere(w: &Weight, n_phi: usize, n_theta: usize) -> (CsrMatrix, CsrMatrix) {
    let dphi = PI / n_phi as f64;
    let dth = 2.0 * PI / n_theta as f64;
    let area: f64 = (0..n_phi)
        .map(|p| ((p as f64 + 0.5) * dphi).sin() * dphi * dth)
        .sum::<f64>()
        * n_theta as f64;
    let idx = |p: usize, q: usize| p * n_theta + q % n_theta;
    let mut b = SymmetricBuilder::with_capacity(n_phi * n_theta, 8 * n_phi * n_theta);
    for p in 0..n_phi {
        let phi = (p as f64 + 0.5) * dphi;
        for q in 0..n_theta {
            let th = q as f64 * dth;
            // longitudinal face
            let a = w.eval_sphere(phi, th + 0.5 * dth);
            b.add_edge(idx(p, q), idx(p, q + 1), a * dphi / (phi.sin() * dth) / area);
            // latitudinal face; the pole faces have zero length
            if p + 1 < n_phi {
                let phf = (p + 1) as f64 * dphi;
                let a = w.eval_sphere(phf, th);
                b.add_edge(idx(p, q), idx(p + 1, q), a * phf.sin() * dth / dphi / area);
            }
        }
    }
    let mass: Vec<f64> = w
        .samples()
        .iter()
        .zip(w.quadrature())
        .map(|(a, q)| a * q)
        .collect();
    (b.build(), CsrMatrix::from_diagonal(&mass))
}

fn check_len(u: &[f64], w: &Weight) -> Result<()> {
    if u.len() != w.len() {
        return Err(GapError::usage(format!(
            "function has {} samples, weight grid has {}",
            u.len(),
            w.len()
        )));
    }
    Ok(())
}

/// `⨍ a u v` by the grid quadrature.
pub fn weighted_inner(u: &[f64], v: &[f64], w: &Weight) -> Result<f64> {
    check_len(u, w)?;
    check_len(v, w)?;
    Ok(w.samples()
        .iter()
        .zip(w.quadrature())
        .zip(u.iter().zip(v))
        .map(|((a, q), (x, y))| a * q * x * y)
        .sum())
}

/// `⨍ a|∇u|² / ⨍ a u²` with the eigensolver's discrete gradient.
pub fn rayleigh(u: &[f64], w: &Weight) -> Result<f64> {
    check_len(u, w)?;
    let pair = assemble(w)?;
    let den = pair.mass.matrix.quad_form(u);
    if !(den > 0.0) {
        return Err(GapError::usage("Rayleigh quotient of the zero function"));
    }
    Ok(pair.stiffness.matrix.quad_form(u) / den)
}

/// One eigenspace: a run of indices whose eigenvalues agree within their
/// error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenspace {
    pub value: f64,
    pub error: f64,
    pub start: usize,
    pub len: usize,
}

impl Eigenspace {
    pub fn indices(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    pub fn multiplicity(&self) -> usize {
        self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Also solve at twice the resolution, extrapolate and attach error bars.
    pub refine: bool,
    pub method: EigenMethod,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            refine: true,
            method: EigenMethod::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub weight: Weight,
    /// Reported eigenvalues, extrapolated from `N` and `2N` when refined.
    pub eigenvalues: Vec<f64>,
    /// Self-convergence error bar per eigenvalue (zero when not refined).
    pub errors: Vec<f64>,
    /// Eigenvalues of the pencil at the basis resolution.
    pub discrete_eigenvalues: Vec<f64>,
    /// `a`-orthonormal samples on the weight's grid.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub eigenspaces: Vec<Eigenspace>,
}

impl SpectralBasis {
    pub fn resolution(&self) -> usize {
        match self.weight.grid() {
            SphereGrid::Circle { n_theta } => n_theta,
            SphereGrid::LatLong { n_theta, .. } => n_theta,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The eigenspace of the first eigenvalue above [`ZERO_MODE_TOL`].
    pub fn lambda1_space(&self) -> Result<&Eigenspace> {
        self.eigenspaces
            .iter()
            .find(|s| s.value > ZERO_MODE_TOL)
            .ok_or_else(|| GapError::Numerical {
                message: "no positive eigenvalue among the computed pairs".into(),
                residual: f64::NAN,
            })
    }

    pub fn lambda1(&self) -> Result<f64> {
        Ok(self.lambda1_space()?.value)
    }

    pub fn lambda1_error(&self) -> Result<f64> {
        Ok(self.lambda1_space()?.error)
    }

    /// First eigenfunction of the `λ₁` eigenspace.
    pub fn y1(&self) -> Result<&[f64]> {
        let s = self.lambda1_space()?;
        Ok(&self.eigenfunctions[s.start])
    }
}

fn doubled(grid: SphereGrid) -> SphereGrid {
    match grid {
        SphereGrid::Circle { n_theta } => SphereGrid::Circle { n_theta: 2 * n_theta },
        SphereGrid::LatLong { n_phi, n_theta } => SphereGrid::LatLong {
            n_phi: 2 * n_phi,
            n_theta: 2 * n_theta,
        },
    }
}

/// Eigenvalues of the pencil at the weight's own resolution.
pub fn discrete_spectrum(w: &Weight, k: usize) -> Result<Vec<f64>> {
    let pair = assemble(w)?;
    Ok(sym_gen_eig_with(&pair, k.min(pair.dim()), EigenMethod::Auto)?
        .into_iter()
        .map(|p| p.value)
        .collect())
}

pub fn solve_spectrum(w: &Weight, k: usize) -> Result<SpectralBasis> {
    solve_spectrum_with(w, k, SpectrumOptions::default())
}

/// At least `k` eigenpairs, extended so the last eigenspace is complete.
pub fn solve_spectrum_with(w: &Weight, k: usize, opts: SpectrumOptions) -> Result<SpectralBasis> {
    if k < 2 {
        return Err(GapError::usage("solve_spectrum needs k >= 2"));
    }
    let pair = assemble(w)?;
    let dim = pair.dim();
    if k > dim {
        return Err(GapError::usage(format!("k = {k} exceeds grid size {dim}")));
    }
    let fine_pair = if opts.refine {
        Some(assemble(&w.resampled(doubled(w.grid()))?)?)
    } else {
        None
    };
    let mut k_eff = (k + 1).min(dim);
    loop {
        let coarse = sym_gen_eig_with(&pair, k_eff, opts.method)?;
        let raw: Vec<f64> = coarse.iter().map(|p| p.value).collect();
        let (values, errors) = match &fine_pair {
            Some(fp) => {
                let fine_vals: Vec<f64> = sym_gen_eig_with(fp, k_eff, opts.method)?
                    .into_iter()
                    .map(|p| p.value)
                    .collect();
                let ext: Vec<f64> = raw
                    .iter()
                    .zip(&fine_vals)
                    .map(|(c, f)| (4.0 * f - c) / 3.0)
                    .collect();
                let err = ext.iter().zip(&fine_vals).map(|(e, f)| (e - f).abs()).collect();
                (ext, err)
            }
            None => (raw.clone(), vec![0.0; raw.len()]),
        };
        let spaces = cluster(&values, &errors);
        let last = spaces
            .iter()
            .find(|s| s.indices().contains(&(k - 1)))
            .expect("index k-1 is covered");
        let end = last.start + last.len;
        if end < k_eff || k_eff == dim {
            let keep = end.min(k_eff);
            let mut functions: Vec<Vec<f64>> =
                coarse.into_iter().take(keep).map(|p| p.vector).collect();
            functions.iter_mut().for_each(|f| fix_sign(f));
            return Ok(SpectralBasis {
                weight: w.clone(),
                eigenvalues: values[..keep].to_vec(),
                errors: errors[..keep].to_vec(),
                discrete_eigenvalues: raw[..keep].to_vec(),
                eigenfunctions: functions,
                eigenspaces: spaces.into_iter().filter(|s| s.start < keep).collect(),
            });
        }
        k_eff = (k_eff + 4).min(dim);
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn cluster(values: &[f64], errors: &[f64]) -> Vec<Eigenspace> {
    let mut out: Vec<Eigenspace> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let (a, b) = (values[i - 1], values[i]);
            let tol = (CLUSTER_REL_TOL * a.abs().max(b.abs()))
                .max(2.0 * (errors[i - 1] + errors[i]))
                .max(if a.abs() <= ZERO_MODE_TOL { ZERO_MODE_TOL } else { 0.0 });
            (b - a).abs() > tol
        };
        if split {
            let len = i - start;
            let value = values[start..i].iter().sum::<f64>() / len as f64;
            let spread = values[start..i]
                .iter()
                .fold(0.0_f64, |m, v| m.max((v - value).abs()));
            let error = errors[start..i].iter().fold(spread, |m, e| m.max(*e));
            out.push(Eigenspace {
                value,
                error,
                start,
                len,
            });
            start = i;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Sample permutation induced by `ξ_axis → −ξ_axis` (axis is 1-based).
pub fn reflection(grid: SphereGrid, axis: usize) -> Result<Vec<usize>> {
    match (grid, axis) {
        (SphereGrid::Circle { n_theta: n }, 1) if n % 2 == 0 => {
            Ok((0..n).map(|j| (n / 2 + n - j) % n).collect())
        }
        (SphereGrid::Circle { n_theta: n }, 2) => Ok((0..n).map(|j| (n - j) % n).collect()),
        (SphereGrid::LatLong { n_phi, n_theta }, 1..=3) => {
            if axis == 1 && n_theta % 2 != 0 {
                return Err(GapError::usage("x1 reflection needs an even longitude count"));
            }
            Ok((0..n_phi * n_theta)
                .map(|k| {
                    let (p, q) = (k / n_theta, k % n_theta);
                    match axis {
                        1 => p * n_theta + (n_theta / 2 + n_theta - q) % n_theta,
                        2 => p * n_theta + (n_theta - q) % n_theta,
                        _ => (n_phi - 1 - p) * n_theta + q,
                    }
                })
                .collect())
        }
        _ => Err(GapError::usage(format!(
            "axis {axis} is not a grid symmetry of {grid:?}"
        ))),
    }
}

/// True when `a(ξ)` is unchanged by flipping `ξ_axis`.
pub fn weight_is_symmetric(w: &Weight, axis: usize) -> bool {
    let d = w.grid().ambient_dim();
    if axis == 0 || axis > d {
        return false;
    }
    let m = w.matrix();
    let scale = m.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    let j = axis - 1;
    (0..d)
        .filter(|&i| i != j)
        .all(|i| m[i * d + j].abs() <= 1e-14 * scale && m[j * d + i].abs() <= 1e-14 * scale)
}

fn reflect(u: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&k| u[k]).collect()
}

/// Parity of one function under `ξ_axis → −ξ_axis`.
pub fn parity_of(u: &[f64], w: &Weight, axis: usize) -> Result<Parity> {
    check_len(u, w)?;
    let perm = reflection(w.grid(), axis)?;
    Ok(tag(u, &reflect(u, &perm), w))
}

fn tag(u: &[f64], ru: &[f64], w: &Weight) -> Parity {
    let norm = |v: &[f64]| weighted_inner(v, v, w).unwrap_or(0.0).sqrt();
    let base = norm(u);
    if base == 0.0 {
        return Parity::Even;
    }
    let plus: Vec<f64> = u.iter().zip(ru).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = u.iter().zip(ru).map(|(a, b)| a - b).collect();
    if norm(&minus) <= PARITY_TOL * base {
        Parity::Even
    } else if norm(&plus) <= PARITY_TOL * base {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

#[derive(Debug, Clone)]
pub struct ParityReport {
    pub axis: usize,
    /// Symmetry-adapted eigenfunctions, index-aligned with the basis.
    pub functions: Vec<Vec<f64>>,
    pub tags: Vec<Parity>,
    /// Index of an odd function inside the `λ₁` eigenspace, if any.
    pub lambda1_odd: Option<usize>,
}

impl ParityReport {
    pub fn lambda1_has_odd(&self) -> bool {
        self.lambda1_odd.is_some()
    }
}

/// Tags each eigenfunction after rotating every eigenspace into a basis
/// that diagonalizes the reflection.
pub fn classify_parity(basis: &SpectralBasis, axis: usize) -> Result<ParityReport> {
    let w = &basis.weight;
    if !weight_is_symmetric(w, axis) {
        return Err(GapError::Inapplicable(format!(
            "weight is not symmetric under reflection of axis {axis}"
        )));
    }
    let perm = reflection(w.grid(), axis)?;
    let mut functions = basis.eigenfunctions.clone();
    for space in &basis.eigenspaces {
        let idx: Vec<usize> = space.indices().collect();
        if idx.len() < 2 {
            continue;
        }
        let d = idx.len();
        let reflected: Vec<Vec<f64>> = idx.iter().map(|&i| reflect(&functions[i], &perm)).collect();
        let mut p = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                p[(a, b)] = weighted_inner(&functions[idx[a]], &reflected[b], w)?;
            }
        }
        let p = (&p + p.transpose()) * 0.5;
        let eig = SymmetricEigen::new(p);
        // odd directions first so they lead each eigenspace
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let old: Vec<Vec<f64>> = idx.iter().map(|&i| functions[i].clone()).collect();
        for (slot, &c) in order.iter().enumerate() {
            let mut v = vec![0.0; w.len()];
            for (a, f) in old.iter().enumerate() {
                let q = eig.eigenvectors[(a, c)];
                for (vv, ff) in v.iter_mut().zip(f) {
                    *vv += q * ff;
                }
            }
            fix_sign(&mut v);
            functions[idx[slot]] = v;
        }
    }
    let tags: Vec<Parity> = functions
        .iter()
        .map(|f| tag(f, &reflect(f, &perm), w))
        .collect();
    let l1 = basis.lambda1_space()?;
    let lambda1_odd = l1.indices().find(|&i| tags[i] == Parity::Odd);
    Ok(ParityReport {
        axis,
        functions,
        tags,
        lambda1_odd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_weight, GapGeometry};
    use proptest::prelude::*;

    fn circle(m: [f64; 4], n: usize) -> Weight {
        Weight::from_matrix(m.to_vec(), SphereGrid::Circle { n_theta: n }).unwrap()
    }

    fn angles(n: usize) -> Vec<f64> {
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    #[test]
    fn inner_product_examples() {
        let w = circle([1.0, 0.0, 0.0, 1.0], 64);
        let one = vec![1.0; 64];
        let c: Vec<f64> = angles(64).iter().map(|t| t.cos()).collect();
        let s: Vec<f64> = angles(64).iter().map(|t| t.sin()).collect();
        assert!((weighted_inner(&one, &one, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(weighted_inner(&c, &s, &w).unwrap().abs() < 1e-15);
        assert!((weighted_inner(&c, &c, &w).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            weighted_inner(&one[..10], &one, &w),
            Err(GapError::Usage(_))
        ));
    }

    #[test]
    fn rayleigh_examples() {
        let n = 1024;
        let w = circle([1.0, 0.0, 0.0, 1.0], n);
        assert!(rayleigh(&vec![2.0; n], &w).unwrap().abs() < 1e-10);
        let c: Vec<f64> = angles(n).iter().map(|t| t.cos()).collect();
        let h = 2.0 * PI / n as f64;
        let want = (2.0 - 2.0 * h.cos()) / (h * h);
        assert!((rayleigh(&c, &w).unwrap() - want).abs() < 1e-12);
        assert!((rayleigh(&c, &w).unwrap() - 1.0).abs() < 1e-5);
        assert!(matches!(rayleigh(&vec![0.0; n], &w), Err(GapError::Usage(_))));
    }

    #[test]
    fn constant_weight_circle_spectrum() {
        let w = circle([3.0, 0.0, 0.0, 3.0], 1024);
        let b = solve_spectrum(&w, 5).unwrap();
        for (v, want) in b.eigenvalues.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
            assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        }
        let l1 = b.lambda1_space().unwrap();
        assert_eq!(l1.multiplicity(), 2);
        assert!((l1.value - 1.0).abs() < 1e-6);
        assert!(b.eigenvalues[0].abs() < 1e-10);
    }

    #[test]
    fn basis_is_orthonormal_and_consistent() {
        let w = circle([1.0, 0.0, 0.0, 4.0], 256);
        let b = solve_spectrum(&w, 6).unwrap();
        for (i, u) in b.eigenfunctions.iter().enumerate() {
            for (j, v) in b.eigenfunctions.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((weighted_inner(u, v, &w).unwrap() - want).abs() < 1e-8);
            }
            let rq = rayleigh(u, &w).unwrap();
            assert!((rq - b.discrete_eigenvalues[i]).abs() < 1e-8 * rq.max(1.0));
        }
        let y0 = &b.eigenfunctions[0];
        assert!(y0.iter().all(|v| (v - y0[0]).abs() < 1e-8));
        let l1 = b.lambda1().unwrap();
        assert!(l1 > 0.0 && l1 <= 1.0 + b.lambda1_error().unwrap());
    }

    #[test]
    fn parity_of_harmonics() {
        let w = circle([1.0, 0.0, 0.0, 1.0], 64);
        let c2: Vec<f64> = angles(64).iter().map(|t| (2.0 * t).cos()).collect();
        let s: Vec<f64> = angles(64).iter().map(|t| t.sin()).collect();
        assert_eq!(parity_of(&c2, &w, 2).unwrap(), Parity::Even);
        assert_eq!(parity_of(&s, &w, 2).unwrap(), Parity::Odd);
        assert_eq!(parity_of(&s, &w, 1).unwrap(), Parity::Even);
        let b = solve_spectrum(&w, 3).unwrap();
        let rep = classify_parity(&b, 2).unwrap();
        assert!(rep.lambda1_has_odd());
        let odd = &rep.functions[rep.lambda1_odd.unwrap()];
        // the odd member is ±sinθ up to normalization
        let corr = weighted_inner(odd, &s, &w).unwrap() / 0.5_f64.sqrt();
        assert!((corr.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn anisotropic_parity_is_stable() {
        let tags_at = |n: usize| {
            let w = circle([1.0, 0.0, 0.0, 4.0], n);
            let b = solve_spectrum(&w, 3).unwrap();
            let r1 = classify_parity(&b, 1).unwrap();
            let r2 = classify_parity(&b, 2).unwrap();
            let i = b.lambda1_space().unwrap().start;
            (r1.tags[i], r2.tags[i])
        };
        let coarse = tags_at(128);
        assert_eq!(coarse, tags_at(256));
        assert_ne!(coarse.0, Parity::Mixed);
        assert_ne!(coarse.1, Parity::Mixed);
    }

    #[test]
    fn asymmetric_weight_is_inapplicable() {
        let w = circle([2.0, 0.5, 0.5, 1.0], 64);
        let b = solve_spectrum_with(&w, 3, SpectrumOptions { refine: false, ..Default::default() })
            .unwrap();
        assert!(matches!(classify_parity(&b, 2), Err(GapError::Inapplicable(_))));
    }

    #[test]
    fn second_order_convergence() {
        let lam = |n: usize| {
            let w = circle([1.0, 0.0, 0.0, 4.0], n);
            discrete_spectrum(&w, 2).unwrap()[1]
        };
        let (a, b, c) = (lam(128), lam(256), lam(512));
        let order = ((a - b) / (b - c)).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn sphere_constant_weight_small_grid() {
        let g = GapGeometry::ball(4, 0.1).unwrap();
        let w = build_weight(&g, 32).unwrap();
        let b = solve_spectrum(&w, 4).unwrap();
        let l1 = b.lambda1_space().unwrap();
        assert_eq!(l1.multiplicity(), 3);
        assert!((l1.value - 2.0).abs() < 1e-3);
        for axis in 1..=3 {
            assert!(classify_parity(&b, axis).unwrap().lambda1_has_odd());
        }
    }

    #[test]
    fn k_below_two_is_rejected() {
        let w = circle([1.0, 0.0, 0.0, 1.0], 32);
        assert!(matches!(solve_spectrum(&w, 1), Err(GapError::Usage(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn spectrum_is_scale_invariant(c in prop::sample::select(vec![1e-3, 0.5, 7.0, 1e3]),
                                       m22 in 1.0f64..6.0) {
            let opts = SpectrumOptions { refine: false, ..Default::default() };
            let w = circle([1.0, 0.0, 0.0, m22], 128);
            let a = solve_spectrum_with(&w, 4, opts).unwrap();
            let b = solve_spectrum_with(&w.scaled(c).unwrap(), 4, opts).unwrap();
            let top = a.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!((x - y).abs() <= 1e-10 * top);
            }
        }

        #[test]
        fn rayleigh_is_minimized_by_y1(seed in 0u64..1000, eta in 1e-3f64..0.5) {
            use rand::{Rng, SeedableRng};
            let w = circle([1.0, 0.0, 0.0, 4.0], 128);
            let opts = SpectrumOptions { refine: false, ..Default::default() };
            let b = solve_spectrum_with(&w, 3, opts).unwrap();
            let y1 = b.y1().unwrap();
            let lam = b.discrete_eigenvalues[b.lambda1_space().unwrap().start];
            prop_assert!((rayleigh(y1, &w).unwrap() - lam).abs() < 1e-8);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut z: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let one = vec![1.0; 128];
            let c = weighted_inner(&z, &one, &w).unwrap() / weighted_inner(&one, &one, &w).unwrap();
            z.iter_mut().for_each(|v| *v -= c);
            let u: Vec<f64> = y1.iter().zip(&z).map(|(a, b)| a + eta * b).collect();
            prop_assert!(rayleigh(&u, &w).unwrap() >= lam - 1e-8);
        }
    }
}
