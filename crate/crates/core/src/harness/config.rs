//! Experiment configuration files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::gapfull::StripSizes;
use crate::geometry::GapGeometry;
use crate::reduced::{DiskGrid, DEFAULT_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Half-decade spacing from `1e-2` to `1e-4`.
pub fn default_epsilons() -> Vec<f64> {
    [-2.0, -2.5, -3.0, -3.5, -4.0].iter().map(|e| 10f64.powf(*e)).collect()
}

/// Rings required below `√ε_min`.
pub const MIN_RINGS_BELOW_SQRT_EPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Row-major `M`, `(n−1)²` entries.
    pub hessian: Vec<f64>,
    #[serde(default)]
    pub quartic: f64,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default = "half")]
    pub f_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    /// Growth factor of consecutive ring widths near the center.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Sphere resolution for the eigenvalue used in predictions.
    #[serde(default = "default_spectral_n")]
    pub spectral_n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            radius: 1.0,
            n_r: default_n_r(),
            n_theta: default_n_theta(),
            ratio: default_ratio(),
            spectral_n: default_spectral_n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    /// Strip half-width; defaults to `min(R₀, radius)`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_gap_lateral")]
    pub lateral: usize,
    #[serde(default = "default_gap_theta")]
    pub n_theta: usize,
    #[serde(default = "default_gap_vertical")]
    pub vertical: usize,
    #[serde(default = "default_gap_stretch")]
    pub stretch: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            rho: None,
            lateral: default_gap_lateral(),
            n_theta: default_gap_theta(),
            vertical: default_gap_vertical(),
            stretch: default_gap_stretch(),
        }
    }
}

/// Lateral Dirichlet data on `|x′| = R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySelector {
    /// `Y₁(θ)·(r/R)^α`, which is `Y₁` on the rim.
    Y1Ramp,
    /// `φ = x_j`, 1-based.
    Coordinate { j: usize },
    /// One value per boundary angle.
    Samples { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_solver_tol")]
    pub solver: f64,
    /// Allowed distance between fitted and predicted exponents.
    #[serde(default = "default_exponent_tol")]
    pub exponent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: DEFAULT_TOL,
            exponent: default_exponent_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub label: Option<String>,
    pub n: usize,
    pub geometry: GeometryConfig,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_boundary")]
    pub boundary: BoundarySelector,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Full gap solves; sweeps also run them when `gap_in_sweeps` is set.
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub gap_in_sweeps: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_n_r() -> usize {
    300
}
fn default_n_theta() -> usize {
    64
}
fn default_ratio() -> f64 {
    1.04
}
fn default_spectral_n() -> usize {
    1024
}
fn default_gap_lateral() -> usize {
    48
}
fn default_gap_theta() -> usize {
    32
}
fn default_gap_vertical() -> usize {
    16
}
fn default_gap_stretch() -> f64 {
    4.0
}
fn default_solver_tol() -> f64 {
    DEFAULT_TOL
}
fn default_exponent_tol() -> f64 {
    0.05
}
fn default_boundary() -> BoundarySelector {
    BoundarySelector::Y1Ramp
}

impl ExperimentConfig {
    /// `M = diag(m)` in dimension 3 with every other field at its default.
    pub fn diagonal(m: [f64; 2]) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            label: None,
            n: 3,
            geometry: GeometryConfig {
                hessian: vec![m[0], 0.0, 0.0, m[1]],
                quartic: 0.0,
                r0: 1.0,
                f_share: 0.5,
            },
            epsilons: default_epsilons(),
            grid: GridConfig::default(),
            boundary: BoundarySelector::Y1Ramp,
            tolerances: Tolerances::default(),
            gap: GapConfig::default(),
            gap_in_sweeps: false,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| GapError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GapError::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| GapError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let h = &self.geometry.hessian;
            let m = self.n - 1;
            let diag: Vec<String> = (0..m).map(|i| format!("{}", h[i * m + i])).collect();
            format!("n{}_m{}", self.n, diag.join("-"))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(GapError::usage(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.epsilons.is_empty() {
            return Err(GapError::usage("epsilon list is empty"));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(GapError::usage("epsilon values must be positive"));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(GapError::usage("epsilon values must be strictly descending"));
        }
        if let Some(label) = &self.label {
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(GapError::usage(format!("label {label:?} is not a safe file stem")));
            }
        }
        let t = self.tolerances;
        if !(t.solver > 0.0 && t.solver < 1.0) || !(t.exponent > 0.0) {
            return Err(GapError::usage("tolerances must be positive (solver below 1)"));
        }
        self.geometry()?;
        if self.n == 3 {
            let grid = self.disk_grid()?;
            let eps_min = self.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
            let below = grid.rings_below(eps_min.sqrt());
            if below < MIN_RINGS_BELOW_SQRT_EPS {
                return Err(GapError::usage(format!(
                    "only {below} radial cells lie below sqrt(eps_min) = {:.3e}; need {MIN_RINGS_BELOW_SQRT_EPS}",
                    eps_min.sqrt()
                )));
            }
            match &self.boundary {
                BoundarySelector::Coordinate { j } if !(1..=2).contains(j) => {
                    return Err(GapError::usage(format!("coordinate x_{j} does not exist for n = 3")))
                }
                BoundarySelector::Samples { values } if values.len() != self.grid.n_theta => {
                    return Err(GapError::usage(format!(
                        "{} boundary samples given, grid has {} angles",
                        values.len(),
                        self.grid.n_theta
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Geometry at the largest `ε` (or at `eps` via [`Self::geometry_at`]).
    pub fn geometry(&self) -> Result<GapGeometry> {
        self.geometry_at(self.epsilons[0])
    }

    pub fn geometry_at(&self, eps: f64) -> Result<GapGeometry> {
        let g = &self.geometry;
        GapGeometry::new(self.n, eps, g.hessian.clone(), g.quartic, g.f_share, g.r0)
    }

    pub fn disk_grid(&self) -> Result<DiskGrid> {
        let g = &self.grid;
        DiskGrid::geometric(g.radius, g.n_r, g.n_theta, g.ratio)
    }

    pub fn strip_rho(&self) -> f64 {
        self.gap.rho.unwrap_or(self.geometry.r0.min(self.grid.radius))
    }

    pub fn strip_sizes(&self) -> StripSizes {
        StripSizes {
            lateral: self.gap.lateral,
            n_theta: self.gap.n_theta,
            vertical: self.gap.vertical,
            stretch: self.gap.stretch,
        }
    }

    /// Boundary samples at angles `2πj/count`, given `Y₁` on the same
    /// angles. `Y1Ramp` evaluates the ramp at the rim, where it equals `Y₁`.
    pub fn boundary_samples(&self, count: usize, y1: &[f64]) -> Result<Vec<f64>> {
        match &self.boundary {
            BoundarySelector::Y1Ramp => {
                if y1.len() != count {
                    return Err(GapError::usage("Y1 samples do not match the boundary grid"));
                }
                Ok(y1.to_vec())
            }
            BoundarySelector::Coordinate { j } => {
                let r = self.grid.radius;
                Ok((0..count)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / count as f64;
                        if *j == 1 {
                            r * t.cos()
                        } else {
                            r * t.sin()
                        }
                    })
                    .collect())
            }
            BoundarySelector::Samples { values } => {
                if values.len() != count {
                    return Err(GapError::usage(format!(
                        "{} boundary samples given, {count} needed",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}
