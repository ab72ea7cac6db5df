//! Direct solves of `Δu = 0` in the neck with insulated walls.
//!
//! The neck is flattened by `y′ = x′`, `y_n = (x_n − g)/δ − ½`, which turns
//! the Laplacian into `∂ᵢ(bⁱʲ∂ⱼu)` on the box `|y_n| ≤ ½` with
//! `b = [[δI, −w], [−wᵗ, (1 + |w|²)/δ]]` and `w = ∇g + (y_n + ½)∇δ`. Trilinear
//! (bilinear for `n = 2`) Galerkin elements keep the system symmetric, and
//! the insulating condition is the natural one: no wall terms are assembled.
//! Lateral walls carry Dirichlet data. For `n = 3` the lateral grid is polar
//! with ring radii at the reduced solver's cell centers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::{GapGeometry, Weight};
use crate::numerics::{pcg, CgOptions, CsrMatrix, Preconditioner, SkylineCholesky, SymmetricBuilder};
use crate::reduced::{DiskField, DiskGrid};

/// The two walls of the neck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Walls {
    Neck(GapGeometry),
    /// Parallel plates `g = 0`, `f = 0`.
    Flat { n: usize, epsilon: f64 },
}

impl Walls {
    pub fn n(&self) -> usize {
        match self {
            Walls::Neck(g) => g.n(),
            Walls::Flat { n, .. } => *n,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Walls::Neck(g) => g.epsilon(),
            Walls::Flat { epsilon, .. } => *epsilon,
        }
    }

    pub fn delta(&self, x: &[f64]) -> f64 {
        match self {
            Walls::Neck(g) => g.epsilon() + g.height(x),
            Walls::Flat { epsilon, .. } => *epsilon,
        }
    }

    fn grad_delta(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Walls::Neck(g) => g.height_grad(x),
            Walls::Flat { .. } => vec![0.0; x.len()],
        }
    }

    fn grad_g(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Walls::Neck(g) => g.grad_g(x),
            Walls::Flat { .. } => vec![0.0; x.len()],
        }
    }

    /// `w = ∂x_n/∂y′` at `(x′, y_n)`.
    fn slope(&self, x: &[f64], yn: f64) -> Vec<f64> {
        self.grad_g(x)
            .iter()
            .zip(self.grad_delta(x))
            .map(|(g, d)| g + (yn + 0.5) * d)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSizes {
    /// Rings (`n = 3`) or cells on each side of the origin (`n = 2`).
    pub lateral: usize,
    /// Angular count (`n = 3` only).
    pub n_theta: usize,
    pub vertical: usize,
    /// Stretching `κ` of the lateral spacing.
    pub stretch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Lateral {
    /// Nodes `x₀ < … < x_m`, symmetric about zero.
    Line { x: Vec<f64> },
    /// Center node, then rings at the disk's cell centers and at the rim.
    Polar { disk: DiskGrid, radii: Vec<f64> },
}

/// The flattened neck `|y′| ≤ ρ`, `|y_n| ≤ ½` with its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedStrip {
    walls: Walls,
    rho: f64,
    sizes: StripSizes,
    lateral: Lateral,
    levels: Vec<f64>,
}

pub fn map_strip(geom: &GapGeometry, rho: f64, sizes: StripSizes) -> Result<MappedStrip> {
    if rho > geom.r0() {
        return Err(GapError::usage(format!(
            "strip half-width {rho} exceeds R0 = {}",
            geom.r0()
        )));
    }
    MappedStrip::new(Walls::Neck(geom.clone()), rho, sizes)
}

impl MappedStrip {
    pub fn new(walls: Walls, rho: f64, sizes: StripSizes) -> Result<Self> {
        let n = walls.n();
        if !(n == 2 || n == 3) {
            return Err(GapError::usage(format!("gap solves support n = 2 or 3, got {n}")));
        }
        if !(rho > 0.0) || !(walls.epsilon() > 0.0) {
            return Err(GapError::usage("strip width and epsilon must be positive"));
        }
        if sizes.vertical < 1 || sizes.lateral < 4 {
            return Err(GapError::usage("strip grid too coarse"));
        }
        let lateral = if n == 2 {
            let m = sizes.lateral as f64;
            let k = sizes.stretch;
            let x = (0..=2 * sizes.lateral)
                .map(|i| {
                    let s = (i as f64 - m) / m;
                    if k < 1e-8 {
                        rho * s
                    } else {
                        rho * (k * s).sinh() / k.sinh()
                    }
                })
                .collect();
            Lateral::Line { x }
        } else {
            let disk = DiskGrid::new(rho, sizes.lateral, sizes.n_theta, sizes.stretch)?;
            let mut radii = vec![0.0];
            radii.extend_from_slice(disk.centers());
            radii.push(rho);
            Lateral::Polar { disk, radii }
        };
        let levels = (0..=sizes.vertical)
            .map(|k| k as f64 / sizes.vertical as f64 - 0.5)
            .collect();
        Ok(MappedStrip {
            walls,
            rho,
            sizes,
            lateral,
            levels,
        })
    }

    /// Parallel plates at distance `epsilon`.
    pub fn flat(n: usize, epsilon: f64, rho: f64, sizes: StripSizes) -> Result<Self> {
        Self::new(Walls::Flat { n, epsilon }, rho, sizes)
    }

    /// Lateral and vertical spacing halved.
    pub fn refined(&self) -> Result<Self> {
        let s = self.sizes;
        Self::new(
            self.walls.clone(),
            self.rho,
            StripSizes {
                lateral: 2 * s.lateral,
                n_theta: 2 * s.n_theta,
                vertical: 2 * s.vertical,
                stretch: s.stretch,
            },
        )
    }

    pub fn n(&self) -> usize {
        self.walls.n()
    }

    pub fn walls(&self) -> &Walls {
        &self.walls
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sizes(&self) -> StripSizes {
        self.sizes
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Disk grid whose cell centers carry the interior rings (`n = 3`).
    pub fn disk(&self) -> Option<&DiskGrid> {
        match &self.lateral {
            Lateral::Polar { disk, .. } => Some(disk),
            Lateral::Line { .. } => None,
        }
    }

    fn n_theta(&self) -> usize {
        self.sizes.n_theta
    }

    fn lateral_len(&self) -> usize {
        match &self.lateral {
            Lateral::Line { x } => x.len(),
            Lateral::Polar { radii, .. } => 1 + (radii.len() - 1) * self.n_theta(),
        }
    }

    fn stride(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.lateral_len() * self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lateral node of polar ring `i ≥ 1` at angle `j`.
    fn ring_node(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            0
        } else {
            1 + (i - 1) * self.n_theta() + j % self.n_theta()
        }
    }

    /// Cartesian `x′` of a lateral node.
    pub fn lateral_point(&self, l: usize) -> Vec<f64> {
        match &self.lateral {
            Lateral::Line { x } => vec![x[l]],
            Lateral::Polar { radii, .. } => {
                if l == 0 {
                    return vec![0.0, 0.0];
                }
                let (i, j) = (1 + (l - 1) / self.n_theta(), (l - 1) % self.n_theta());
                let t = 2.0 * PI * j as f64 / self.n_theta() as f64;
                vec![radii[i] * t.cos(), radii[i] * t.sin()]
            }
        }
    }

    /// Lateral nodes carrying Dirichlet data, in the order `solve_gap`
    /// expects the samples.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        match &self.lateral {
            Lateral::Line { x } => vec![0, x.len() - 1],
            Lateral::Polar { radii, .. } => (0..self.n_theta())
                .map(|j| self.ring_node(radii.len() - 1, j))
                .collect(),
        }
    }

    pub fn boundary_points(&self) -> Vec<Vec<f64>> {
        self.boundary_nodes()
            .into_iter()
            .map(|l| self.lateral_point(l))
            .collect()
    }

    /// `bⁱʲ` at `(x′, y_n)` in Cartesian `y` coordinates, row-major `n×n`.
    pub fn coefficients(&self, x: &[f64], yn: f64) -> Vec<f64> {
        let n = self.n();
        let d = self.walls.delta(x);
        let w = self.walls.slope(x, yn);
        let mut b = vec![0.0; n * n];
        for i in 0..n - 1 {
            b[i * n + i] = d;
            b[i * n + n - 1] = -w[i];
            b[(n - 1) * n + i] = -w[i];
        }
        b[n * n - 1] = (1.0 + w.iter().map(|v| v * v).sum::<f64>()) / d;
        b
    }

    /// Energy density matrix in the computational coordinates
    /// (`(x, y_n)` or `(r, θ, y_n)`), including the area factor.
    fn metric(&self, z: &[f64]) -> Vec<f64> {
        match self.lateral {
            Lateral::Line { .. } => self.coefficients(&[z[0]], z[1]),
            Lateral::Polar { .. } => {
                let (r, t, yn) = (z[0], z[1], z[2]);
                let (c, s) = (t.cos(), t.sin());
                let x = [r * c, r * s];
                let d = self.walls.delta(&x);
                let w = self.walls.slope(&x, yn);
                let wr = w[0] * c + w[1] * s;
                let wt = -w[0] * s + w[1] * c;
                let nn = (1.0 + w[0] * w[0] + w[1] * w[1]) / d;
                vec![
                    r * d, 0.0, -r * wr,
                    0.0, d / r, -wt,
                    -r * wr, -wt, r * nn,
                ]
            }
        }
    }

    /// Lateral cells as (corner nodes, lower corner, upper corner) in
    /// computational coordinates; corner `c` has bit `b` set when it sits
    /// at the upper end of direction `b`.
    fn lateral_cells(&self) -> Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> {
        match &self.lateral {
            Lateral::Line { x } => (0..x.len() - 1)
                .map(|c| (vec![c, c + 1], vec![x[c]], vec![x[c + 1]]))
                .collect(),
            Lateral::Polar { radii, .. } => {
                let nt = self.n_theta();
                let h = 2.0 * PI / nt as f64;
                let mut out = Vec::with_capacity((radii.len() - 1) * nt);
                for i in 0..radii.len() - 1 {
                    for j in 0..nt {
                        let nodes = vec![
                            self.ring_node(i, j),
                            self.ring_node(i + 1, j),
                            self.ring_node(i, j + 1),
                            self.ring_node(i + 1, j + 1),
                        ];
                        let t = j as f64 * h;
                        out.push((nodes, vec![radii[i], t], vec![radii[i + 1], t + h]));
                    }
                }
                out
            }
        }
    }

    /// Lateral adjacency including the node itself, sorted.
    fn lateral_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.lateral_len()];
        for (nodes, _, _) in self.lateral_cells() {
            for &a in &nodes {
                adj[a].extend_from_slice(&nodes);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Largest condition number of `b` over the element Gauss points.
    pub fn max_condition(&self) -> f64 {
        let mut worst = 1.0_f64;
        let n = self.n();
        for (_, lo, hi) in self.lateral_cells() {
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let x = self.to_cartesian(&mid);
            for &yn in &[-0.5, 0.5] {
                let b = self.coefficients(&x, yn);
                let (l, h) = crate::geometry::symmetric_extremes(n, &b).unwrap_or((f64::NAN, f64::NAN));
                worst = worst.max(h / l);
            }
        }
        worst
    }

    fn to_cartesian(&self, lat: &[f64]) -> Vec<f64> {
        match self.lateral {
            Lateral::Line { .. } => vec![lat[0]],
            Lateral::Polar { .. } => vec![lat[0] * lat[1].cos(), lat[0] * lat[1].sin()],
        }
    }
}

/// Assembled stiffness on every node, boundary rows included.
fn assemble(strip: &MappedStrip) -> Result<CsrMatrix> {
    let stride = strip.stride();
    let nz = stride - 1;
    let adj = strip.lateral_adjacency();
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    for nb in &adj {
        for k in 0..stride {
            for &m in nb {
                for kk in k.saturating_sub(1)..=(k + 1).min(nz) {
                    cols.push(m * stride + kk);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    let mut a = CsrMatrix::from_pattern(row_ptr, cols)?;
    let d = strip.n();
    let corners = 1usize << d;
    let g = 0.5 / 3f64.sqrt();
    let gauss = [0.5 - g, 0.5 + g];
    let levels = strip.levels();
    for (nodes, lo, hi) in strip.lateral_cells() {
        for k in 0..nz {
            let mut zlo = lo.clone();
            zlo.push(levels[k]);
            let mut zhi = hi.clone();
            zhi.push(levels[k + 1]);
            let h: Vec<f64> = zlo.iter().zip(&zhi).map(|(a, b)| b - a).collect();
            let vol: f64 = h.iter().product::<f64>() / corners as f64;
            let mut ke = vec![0.0; corners * corners];
            for gp in 0..corners {
                let xi: Vec<f64> = (0..d).map(|b| gauss[(gp >> b) & 1]).collect();
                let z: Vec<f64> = (0..d).map(|b| zlo[b] + xi[b] * h[b]).collect();
                let m = strip.metric(&z);
                let grads: Vec<Vec<f64>> = (0..corners)
                    .map(|c| {
                        (0..d)
                            .map(|b| {
                                let mut v = if (c >> b) & 1 == 1 { 1.0 } else { -1.0 } / h[b];
                                for o in (0..d).filter(|&o| o != b) {
                                    v *= if (c >> o) & 1 == 1 { xi[o] } else { 1.0 - xi[o] };
                                }
                                v
                            })
                            .collect()
                    })
                    .collect();
                for p in 0..corners {
                    let mg: Vec<f64> = (0..d)
                        .map(|r| (0..d).map(|s| m[r * d + s] * grads[p][s]).sum())
                        .collect();
                    for q in p..corners {
                        let v: f64 = (0..d).map(|r| mg[r] * grads[q][r]).sum();
                        ke[p * corners + q] += vol * v;
                    }
                }
            }
            let global = |c: usize| nodes[c & ((1 << (d - 1)) - 1)] * stride + k + (c >> (d - 1));
            for p in 0..corners {
                for q in p..corners {
                    let v = ke[p * corners + q];
                    let (i, j) = (global(p), global(q));
                    if i == j {
                        a.add_at(i, i, if p == q { v } else { 2.0 * v });
                    } else {
                        a.add_at(i, j, v);
                        a.add_at(j, i, v);
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Vertical line solves plus an exact solve on line aggregates.
struct TwoLevel {
    stride: usize,
    /// Per line: LDLᵗ of the tridiagonal block, as (diag, sub) pairs.
    lines: Vec<(Vec<f64>, Vec<f64>)>,
    coarse: SkylineCholesky,
}

impl TwoLevel {
    fn new(a: &CsrMatrix, stride: usize, adj: &[Vec<usize>]) -> Result<Self> {
        let nl = a.dim() / stride;
        let mut lines = Vec::with_capacity(nl);
        for l in 0..nl {
            let base = l * stride;
            let mut d = vec![0.0; stride];
            let mut e = vec![0.0; stride.saturating_sub(1)];
            for k in 0..stride {
                let dk = a.get(base + k, base + k) - if k > 0 { e[k - 1] * e[k - 1] * d[k - 1] } else { 0.0 };
                if !(dk > 0.0) {
                    return Err(GapError::Setup(format!("line block {l} is not positive definite")));
                }
                d[k] = dk;
                if k + 1 < stride {
                    e[k] = a.get(base + k + 1, base + k) / dk;
                }
            }
            lines.push((d, e));
        }
        let mut b = SymmetricBuilder::new(nl);
        for (l, nb) in adj.iter().enumerate() {
            for &m in nb.iter().filter(|&&m| m >= l) {
                let mut s = 0.0;
                for k in 0..stride {
                    for (j, v) in a.row(l * stride + k) {
                        if j / stride == m {
                            s += v;
                        }
                    }
                }
                if m == l {
                    b.add_diag(l, s);
                } else if s != 0.0 {
                    b.add_pair(l, m, s);
                }
            }
        }
        Ok(TwoLevel {
            stride,
            lines,
            coarse: SkylineCholesky::factor(&b.build())?,
        })
    }
}

impl Preconditioner for TwoLevel {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let s = self.stride;
        let mut agg = vec![0.0; self.lines.len()];
        for (l, (d, e)) in self.lines.iter().enumerate() {
            let rl = &r[l * s..(l + 1) * s];
            agg[l] = rl.iter().sum();
            let zl = &mut z[l * s..(l + 1) * s];
            zl.copy_from_slice(rl);
            for k in 1..s {
                zl[k] -= e[k - 1] * zl[k - 1];
            }
            for k in 0..s {
                zl[k] /= d[k];
            }
            for k in (0..s.saturating_sub(1)).rev() {
                zl[k] -= e[k] * zl[k + 1];
            }
        }
        self.coarse.solve_in_place(&mut agg);
        for (l, c) in agg.iter().enumerate() {
            for v in &mut z[l * s..(l + 1) * s] {
                *v += c;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSolution {
    pub strip: MappedStrip,
    /// Nodal values, vertical index fastest.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Flux entering and leaving through the lateral walls.
    pub flux_in: f64,
    pub flux_out: f64,
    /// Load from the top and bottom walls; the conormal data is zero.
    pub wall_flux: f64,
    pub max_gradient: f64,
    /// Physical point `(x′, x_n)` of the largest gradient.
    pub max_location: Vec<f64>,
}

impl GapSolution {
    pub fn value(&self, lateral: usize, level: usize) -> f64 {
        self.values[lateral * self.strip.stride() + level]
    }

    /// `|flux_in − flux_out| / flux_in`.
    pub fn flux_imbalance(&self) -> f64 {
        if self.flux_in == 0.0 {
            return 0.0;
        }
        (self.flux_in - self.flux_out).abs() / self.flux_in
    }
}

/// Solves with Dirichlet samples `phi` at [`MappedStrip::boundary_points`].
pub fn solve_gap(strip: &MappedStrip, phi: &[f64], tol: f64) -> Result<GapSolution> {
    let bnodes = strip.boundary_nodes();
    if phi.len() != bnodes.len() || phi.iter().any(|v| !v.is_finite()) {
        return Err(GapError::usage(format!(
            "lateral data needs {} finite samples, got {}",
            bnodes.len(),
            phi.len()
        )));
    }
    let stride = strip.stride();
    let full = assemble(strip)?;
    let mut a = full.clone();
    let mut rhs = vec![0.0; a.dim()];
    let mut fixed = vec![None; a.dim()];
    for (&l, &v) in bnodes.iter().zip(phi) {
        for k in 0..stride {
            fixed[l * stride + k] = Some(v);
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            let diag = a.get(i, i);
            for (j, aij) in a.isolate(i, diag) {
                rhs[j] -= aij * v;
            }
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(v) = f {
            rhs[i] = a.get(i, i) * v;
        }
    }
    let adj = strip.lateral_adjacency();
    let pre = TwoLevel::new(&a, stride, &adj)?;
    let out = pcg(&a, &rhs, None, &pre, CgOptions::with_tol(tol))?;
    if log::log_enabled!(log::Level::Debug) {
        log::debug!(
            "gap solve: {} nodes, {} CG steps, residual {:.2e}, max cond(b) {:.2e}",
            a.dim(),
            out.iterations,
            out.residual,
            strip.max_condition()
        );
    }
    let reaction = full.mul_vec(&out.x);
    let (mut flux_in, mut flux_out) = (0.0, 0.0);
    for (i, f) in fixed.iter().enumerate() {
        if f.is_some() {
            if reaction[i] > 0.0 {
                flux_in += reaction[i];
            } else {
                flux_out -= reaction[i];
            }
        }
    }
    let mut sol = GapSolution {
        strip: strip.clone(),
        values: out.x,
        iterations: out.iterations,
        residual: out.residual,
        flux_in,
        flux_out,
        // no wall terms are assembled
        wall_flux: 0.0,
        max_gradient: 0.0,
        max_location: Vec::new(),
    };
    let (g, at) = max_gradient(&sol);
    sol.max_gradient = g;
    sol.max_location = at;
    Ok(sol)
}

/// `|∇ₓu|` at element centers, skipping the two lateral cells next to each
/// Dirichlet wall.
fn max_gradient(sol: &GapSolution) -> (f64, Vec<f64>) {
    let strip = &sol.strip;
    let stride = strip.stride();
    let nz = stride - 1;
    let levels = strip.levels();
    let cells = strip.lateral_cells();
    let skip = |lo: &[f64], hi: &[f64]| match &strip.lateral {
        Lateral::Line { x } => hi[0] <= x[2] || lo[0] >= x[x.len() - 3],
        Lateral::Polar { radii, .. } => lo[0] >= radii[radii.len() - 3],
    };
    let mut best = (0.0, Vec::new());
    for (nodes, lo, hi) in &cells {
        if skip(lo, hi) {
            continue;
        }
        let lat_mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let x = strip.to_cartesian(&lat_mid);
        let dl = strip.walls.delta(&x);
        for k in 0..nz {
            let yn = 0.5 * (levels[k] + levels[k + 1]);
            let hz = levels[k + 1] - levels[k];
            let corner = |c: usize, up: usize| sol.values[nodes[c] * stride + k + up];
            let nc = nodes.len();
            let avg = |f: &dyn Fn(usize) -> f64| (0..nc).map(f).sum::<f64>() / nc as f64;
            let uz = avg(&|c| corner(c, 1) - corner(c, 0)) / hz;
            // lateral derivatives averaged over the two vertical faces
            let lat: Vec<f64> = match nc {
                2 => vec![(0..2).map(|up| corner(1, up) - corner(0, up)).sum::<f64>() / (2.0 * (hi[0] - lo[0]))],
                _ => {
                    let dr = (0..2)
                        .map(|up| corner(1, up) + corner(3, up) - corner(0, up) - corner(2, up))
                        .sum::<f64>()
                        / (4.0 * (hi[0] - lo[0]));
                    let dt = (0..2)
                        .map(|up| corner(2, up) + corner(3, up) - corner(0, up) - corner(1, up))
                        .sum::<f64>()
                        / (4.0 * (hi[1] - lo[1]));
                    let (c, s) = (lat_mid[1].cos(), lat_mid[1].sin());
                    let r = lat_mid[0];
                    vec![dr * c - dt * s / r, dr * s + dt * c / r]
                }
            };
            let w = strip.walls.slope(&x, yn);
            let mut g2 = (uz / dl).powi(2);
            for (li, wi) in lat.iter().zip(&w) {
                g2 += (li - wi * uz / dl).powi(2);
            }
            let g = g2.sqrt();
            if g > best.0 {
                let g_wall = match &strip.walls {
                    Walls::Neck(geom) => geom.g(&x),
                    Walls::Flat { .. } => 0.0,
                };
                let mut at = x.clone();
                at.push(g_wall + (yn + 0.5) * dl);
                best = (g, at);
            }
        }
    }
    best
}

/// `ū` sampled on the lateral nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum VerticalAverage {
    Line { x: Vec<f64>, values: Vec<f64> },
    /// Interior rings on the strip's disk grid.
    Disk(DiskField),
}

fn lateral_average(sol: &GapSolution) -> Vec<f64> {
    let stride = sol.strip.stride();
    let nz = (stride - 1) as f64;
    sol.values
        .chunks(stride)
        .map(|c| c.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / nz)
        .collect()
}

/// Mean over each vertical fiber (midpoint rule on the mapped cells).
pub fn average_vertical(sol: &GapSolution, weight: Option<&Weight>) -> Result<VerticalAverage> {
    let ubar = lateral_average(sol);
    match &sol.strip.lateral {
        Lateral::Line { x } => Ok(VerticalAverage::Line {
            x: x.clone(),
            values: ubar,
        }),
        Lateral::Polar { disk, radii } => {
            let w = weight.ok_or_else(|| {
                GapError::usage("a weight is needed to attach the average to a disk field")
            })?;
            let nt = sol.strip.n_theta();
            let values = (1..radii.len() - 1)
                .flat_map(|i| (0..nt).map(move |j| (i, j)))
                .map(|(i, j)| ubar[sol.strip.ring_node(i, j)])
                .collect();
            let weight = w.resampled(crate::geometry::SphereGrid::Circle { n_theta: nt })?;
            Ok(VerticalAverage::Disk(DiskField::from_values(
                disk.clone(),
                values,
                sol.strip.walls.epsilon(),
                weight,
                sol.residual,
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedResidual {
    /// `max |∂ᵢ(δ∂ᵢū) + ∂ᵢF̃ⁱ|` over the window.
    pub max_residual: f64,
    /// `max |∂ᵢ(δ∂ᵢū)|` over the window, for scale.
    pub scale: f64,
    pub nodes: usize,
}

/// Residual of the averaged equation `∂ᵢ(δ∂ᵢū) + ∂ᵢF̃ⁱ = 0` with
/// `F̃ⁱ = −∫ wᵢ ∂_{y_n}u dy_n`, at lateral nodes with `lo ≤ |x′| ≤ hi`.
pub fn averaged_residual(sol: &GapSolution, lo: f64, hi: f64) -> Result<AveragedResidual> {
    let strip = &sol.strip;
    let stride = strip.stride();
    let levels = strip.levels();
    let ubar = lateral_average(sol);
    let ftilde = |l: usize, x: &[f64]| -> Vec<f64> {
        let mut f = vec![0.0; x.len()];
        for k in 0..stride - 1 {
            let yn = 0.5 * (levels[k] + levels[k + 1]);
            let du = sol.values[l * stride + k + 1] - sol.values[l * stride + k];
            for (fi, wi) in f.iter_mut().zip(strip.walls.slope(x, yn)) {
                *fi -= wi * du;
            }
        }
        f
    };
    let walls = &strip.walls;
    let deriv = |x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64| {
        let w0 = -(x2 - x1) / ((x1 - x0) * (x2 - x0));
        let w2 = (x1 - x0) / ((x2 - x1) * (x2 - x0));
        w0 * f0 - (w0 + w2) * f1 + w2 * f2
    };
    let (mut worst, mut scale, mut count) = (0.0_f64, 0.0_f64, 0);
    match &strip.lateral {
        Lateral::Line { x } => {
            for i in 1..x.len() - 1 {
                if !(x[i].abs() >= lo && x[i].abs() <= hi) {
                    continue;
                }
                let (xm, x0, xp) = (x[i - 1], x[i], x[i + 1]);
                let fp = walls.delta(&[0.5 * (x0 + xp)]) * (ubar[i + 1] - ubar[i]) / (xp - x0);
                let fm = walls.delta(&[0.5 * (xm + x0)]) * (ubar[i] - ubar[i - 1]) / (x0 - xm);
                let main = (fp - fm) / (0.5 * (xp - xm));
                let f: Vec<f64> = (i - 1..=i + 1).map(|l| ftilde(l, &[x[l]])[0]).collect();
                let div = deriv(xm, x0, xp, f[0], f[1], f[2]);
                worst = worst.max((main + div).abs());
                scale = scale.max(main.abs());
                count += 1;
            }
        }
        Lateral::Polar { radii, .. } => {
            let nt = strip.n_theta();
            let h = 2.0 * PI / nt as f64;
            for i in 2..radii.len() - 1 {
                let (rm, r0, rp) = (radii[i - 1], radii[i], radii[i + 1]);
                if !(r0 >= lo && r0 <= hi) {
                    continue;
                }
                for j in 0..nt {
                    let t = j as f64 * h;
                    let at = |r: f64, t: f64| [r * t.cos(), r * t.sin()];
                    let u = |ii: usize, jj: usize| ubar[strip.ring_node(ii, jj)];
                    let jm = (j + nt - 1) % nt;
                    let fp = walls.delta(&at(0.5 * (r0 + rp), t)) * 0.5 * (r0 + rp) * (u(i + 1, j) - u(i, j)) / (rp - r0);
                    let fm = walls.delta(&at(0.5 * (rm + r0), t)) * 0.5 * (rm + r0) * (u(i, j) - u(i - 1, j)) / (r0 - rm);
                    let radial = (fp - fm) / (0.5 * (rp - rm)) / r0;
                    let gp = walls.delta(&at(r0, t + 0.5 * h)) * (u(i, j + 1) - u(i, j)) / h;
                    let gm = walls.delta(&at(r0, t - 0.5 * h)) * (u(i, j) - u(i, jm)) / h;
                    let angular = (gp - gm) / h / (r0 * r0);
                    let main = radial + angular;
                    let polar_f = |ii: usize, jj: usize| {
                        let tt = jj as f64 * h;
                        let f = ftilde(strip.ring_node(ii, jj), &at(radii[ii], tt));
                        let (c, s) = (tt.cos(), tt.sin());
                        (f[0] * c + f[1] * s, -f[0] * s + f[1] * c)
                    };
                    let rf: Vec<f64> = (i - 1..=i + 1).map(|ii| radii[ii] * polar_f(ii, j).0).collect();
                    let div_r = deriv(rm, r0, rp, rf[0], rf[1], rf[2]) / r0;
                    let div_t = (polar_f(i, j + 1).1 - polar_f(i, jm).1) / (2.0 * h * r0);
                    worst = worst.max((main + div_r + div_t).abs());
                    scale = scale.max(main.abs());
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(GapError::usage(format!("no lateral nodes with {lo} <= |x'| <= {hi}")));
    }
    Ok(AveragedResidual {
        max_residual: worst,
        scale,
        nodes: count,
    })
}
