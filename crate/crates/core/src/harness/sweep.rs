//! ε-sweeps for the upper and lower gradient bounds.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BoundarySelector, ExperimentConfig};
use super::fit::{fit_exponent, PowerFit};
use crate::error::{GapError, Result};
use crate::exponents::{gradient_exponent, predict_rate};
use crate::gapfull::{map_strip, solve_gap};
use crate::geometry::{build_weight, Weight};
use crate::reduced::{mode_norm, project_mode, solve_reduced, DiskField, Forcing, RadialProfile};
use crate::spectral::{classify_parity, solve_spectrum, weighted_inner};

/// Fits need at least this many ε values.
pub const MIN_FIT_POINTS: usize = 4;

/// Relative size of the boundary data's component along the odd mode
/// below which the lower-bound pipeline has nothing to measure.
pub const MIN_ODD_SHARE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few points for a fit.
    Rejected,
    /// Hypotheses of the check do not hold.
    Inapplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Rejected => "REJECTED",
            Verdict::Inapplicable => "INAPPLICABLE",
        }
    }

    /// Worst of several verdicts.
    pub fn combine(all: impl IntoIterator<Item = Verdict>) -> Verdict {
        let v: Vec<Verdict> = all.into_iter().collect();
        for worst in [Verdict::Inapplicable, Verdict::Fail, Verdict::Rejected] {
            if v.contains(&worst) {
                return worst;
            }
        }
        Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Upper,
    Lower,
}

/// Measurements at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub max_gradient: f64,
    /// `|x′|` where the maximum sits.
    pub max_gradient_radius: f64,
    /// `ω(√ε)`.
    pub omega: Option<f64>,
    /// `U₁(√ε)`.
    pub amplitude: Option<f64>,
    /// `max |∇ū|` over `½√ε ≤ |x′| ≤ 2√ε`.
    pub witness: Option<f64>,
    pub gap_max_gradient: Option<f64>,
    pub residual: f64,
    /// Wall-clock seconds; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime: f64,
}

/// One comparison of a measured quantity with its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub predicted: Option<f64>,
    pub measured: Option<f64>,
    /// `2·stderr` of a fitted slope.
    pub halfwidth: Option<f64>,
    pub r_squared: Option<f64>,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    fn slope(name: &str, points: &[(f64, f64)], predicted: f64, tol: f64) -> Check {
        let base = Check {
            name: name.to_string(),
            predicted: Some(predicted),
            measured: None,
            halfwidth: None,
            r_squared: None,
            verdict: Verdict::Rejected,
            detail: String::new(),
        };
        if points.len() < MIN_FIT_POINTS {
            return Check {
                detail: format!("fit needs {MIN_FIT_POINTS} points, have {}", points.len()),
                ..base
            };
        }
        match fit_exponent(points) {
            Ok(PowerFit {
                slope,
                r_squared,
                stderr,
                ..
            }) => {
                let pass = (slope - predicted).abs() <= tol;
                Check {
                    measured: Some(slope),
                    halfwidth: stderr.map(|s| 2.0 * s),
                    r_squared: Some(r_squared),
                    verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                    detail: format!("|slope - predicted| <= {tol}"),
                    ..base
                }
            }
            Err(e) => Check {
                verdict: Verdict::Fail,
                detail: e.to_string(),
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub label: String,
    pub n: usize,
    pub lambda1: Option<f64>,
    pub lambda1_error: Option<f64>,
    pub alpha: f64,
    pub tolerance: f64,
    pub records: Vec<SweepRecord>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl SweepResult {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `(ε, value)` pairs of a record column.
    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| {
                let v = match name {
                    "max_gradient" => Some(r.max_gradient),
                    "omega" => r.omega,
                    "amplitude" => r.amplitude,
                    "witness" => r.witness,
                    "gap_max_gradient" => r.gap_max_gradient,
                    _ => None,
                };
                v.map(|v| (r.epsilon, v))
            })
            .collect()
    }
}

/// Successful records of a sweep that stopped on a failed solve.
#[derive(Debug)]
pub struct PartialSweep {
    pub records: Vec<SweepRecord>,
    pub error: GapError,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| GapError::usage(format!("cannot start {workers} workers: {e}")))
}

/// Runs `f` on every `ε`, keeping the configured order.
fn run_points<F>(cfg: &ExperimentConfig, workers: usize, f: F) -> std::result::Result<Vec<SweepRecord>, PartialSweep>
where
    F: Fn(f64) -> Result<SweepRecord> + Sync,
{
    let pool = pool(workers).map_err(|error| PartialSweep {
        records: Vec::new(),
        error,
    })?;
    let results: Vec<Result<SweepRecord>> = pool.install(|| {
        cfg.epsilons
            .par_iter()
            .map(|&eps| {
                let t = Instant::now();
                let mut rec = f(eps)?;
                rec.runtime = t.elapsed().as_secs_f64();
                log::info!("eps = {eps:.3e}: max gradient {:.6e} ({:.2} s)", rec.max_gradient, rec.runtime);
                Ok(rec)
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    match first_err {
        None => Ok(records),
        Some(error) => Err(PartialSweep { records, error }),
    }
}

/// Prediction from the fine sphere grid.
struct Spectral {
    lambda1: f64,
    lambda1_error: f64,
    alpha: f64,
}

fn predict(cfg: &ExperimentConfig) -> Result<Spectral> {
    let geom = cfg.geometry()?;
    let w = build_weight(&geom, cfg.grid.spectral_n)?;
    let report = predict_rate(&solve_spectrum(&w, 4)?)?;
    Ok(Spectral {
        lambda1: report.lambda1,
        lambda1_error: report.lambda1_error,
        alpha: report.alpha,
    })
}

fn boundary_weight(cfg: &ExperimentConfig, count: usize) -> Result<Weight> {
    build_weight(&cfg.geometry()?, count)
}

fn y1_on(w: &Weight) -> Result<Vec<f64>> {
    Ok(solve_spectrum(w, 4)?.y1()?.to_vec())
}

/// Linear interpolation of a ring profile at `r`.
fn profile_at(p: &RadialProfile, r: f64) -> f64 {
    let k = p.rho.partition_point(|&c| c < r).clamp(1, p.rho.len() - 1);
    let s = (r - p.rho[k - 1]) / (p.rho[k] - p.rho[k - 1]);
    (1.0 - s) * p.values[k - 1] + s * p.values[k]
}

fn witness(field: &DiskField, eps: f64) -> f64 {
    let grid = &field.grid;
    let lo = grid.rings_below(0.5 * eps.sqrt());
    let hi = grid.rings_below(2.0 * eps.sqrt());
    field.max_gradient_in(lo..hi).0
}

fn reduced_record(field: &DiskField, eps: f64) -> Result<SweepRecord> {
    let (g, i, _) = field.max_gradient();
    Ok(SweepRecord {
        epsilon: eps,
        max_gradient: g,
        max_gradient_radius: field.grid.centers()[i],
        omega: Some(mode_norm(field, eps.sqrt())?),
        amplitude: None,
        witness: Some(witness(field, eps)),
        gap_max_gradient: None,
        residual: field.residual,
        runtime: 0.0,
    })
}

pub(crate) fn gap_boundary(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if cfg.n == 2 {
        let rho = cfg.strip_rho();
        return match &cfg.boundary {
            BoundarySelector::Y1Ramp => Ok(vec![-1.0, 1.0]),
            BoundarySelector::Coordinate { j: 1 } => Ok(vec![-rho, rho]),
            BoundarySelector::Coordinate { j } => Err(GapError::usage(format!(
                "coordinate x_{j} is not lateral for n = 2"
            ))),
            BoundarySelector::Samples { values } if values.len() == 2 => Ok(values.clone()),
            BoundarySelector::Samples { .. } => Err(GapError::usage("n = 2 gap data needs 2 samples")),
        };
    }
    let count = cfg.gap.n_theta;
    let y1 = match cfg.boundary {
        BoundarySelector::Y1Ramp => y1_on(&boundary_weight(cfg, count)?)?,
        _ => Vec::new(),
    };
    let mut cfg = cfg.clone();
    cfg.grid.radius = cfg.strip_rho();
    cfg.boundary_samples(count, &y1)
}

fn gap_max_gradient(cfg: &ExperimentConfig, eps: f64, phi: &[f64]) -> Result<(f64, f64, f64)> {
    let strip = map_strip(&cfg.geometry_at(eps)?, cfg.strip_rho(), cfg.strip_sizes())?;
    let sol = solve_gap(&strip, phi, cfg.tolerances.solver)?;
    let n = sol.max_location.len().saturating_sub(1);
    let r = sol.max_location[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((sol.max_gradient, r, sol.residual))
}

fn upper_checks(records: &[SweepRecord], alpha: f64, tol: f64, n: usize) -> Vec<Check> {
    let series = |f: &dyn Fn(&SweepRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        records.iter().filter_map(|r| f(r).map(|v| (r.epsilon, v))).collect()
    };
    let mut checks = vec![Check::slope(
        "max_gradient",
        &series(&|r| Some(r.max_gradient)),
        gradient_exponent(alpha),
        tol,
    )];
    if n == 3 {
        checks.push(Check::slope("omega", &series(&|r| r.omega), alpha / 2.0, tol));
        let gap = series(&|r| r.gap_max_gradient);
        if !gap.is_empty() {
            checks.push(Check::slope("gap_max_gradient", &gap, gradient_exponent(alpha), tol));
        }
    }
    checks
}

/// Upper-bound sweep: max gradient and `ω(√ε)` against the predicted rates.
/// Dimension 3 uses the reduced solver; dimension 2 uses full gap solves.
pub fn run_upper_sweep(cfg: &ExperimentConfig, workers: usize) -> std::result::Result<SweepResult, PartialSweep> {
    let early = |error| PartialSweep {
        records: Vec::new(),
        error,
    };
    cfg.validate().map_err(early)?;
    let tol = cfg.tolerances.exponent;
    let mut notes = Vec::new();
    let (spectral, records) = match cfg.n {
        2 => {
            notes.push("n = 2: alpha = 0, reference rate eps^(-1/2) from full gap solves".into());
            let phi = gap_boundary(cfg).map_err(early)?;
            let records = run_points(cfg, workers, |eps| {
                let (g, r, res) = gap_max_gradient(cfg, eps, &phi)?;
                Ok(SweepRecord {
                    epsilon: eps,
                    max_gradient: g,
                    max_gradient_radius: r,
                    omega: None,
                    amplitude: None,
                    witness: None,
                    gap_max_gradient: Some(g),
                    residual: res,
                    runtime: 0.0,
                })
            })?;
            (None, records)
        }
        3 => {
            let spectral = predict(cfg).map_err(early)?;
            let w = boundary_weight(cfg, cfg.grid.n_theta).map_err(early)?;
            let y1 = y1_on(&w).map_err(early)?;
            let phi = cfg.boundary_samples(cfg.grid.n_theta, &y1).map_err(early)?;
            let grid = cfg.disk_grid().map_err(early)?;
            let gap_phi = if cfg.gap_in_sweeps {
                Some(gap_boundary(cfg).map_err(early)?)
            } else {
                None
            };
            let records = run_points(cfg, workers, |eps| {
                let field = solve_reduced(&w, eps, &grid, &phi, &Forcing::zero(), cfg.tolerances.solver)?;
                let mut rec = reduced_record(&field, eps)?;
                if let Some(gphi) = &gap_phi {
                    rec.gap_max_gradient = Some(gap_max_gradient(cfg, eps, gphi)?.0);
                }
                Ok(rec)
            })?;
            (Some(spectral), records)
        }
        n => return Err(early(GapError::usage(format!("sweeps support n = 2 or 3, got {n}")))),
    };
    let alpha = spectral.as_ref().map_or(0.0, |s| s.alpha);
    let checks = upper_checks(&records, alpha, tol, cfg.n);
    if records.len() < MIN_FIT_POINTS {
        notes.push(format!("{} eps values: fits rejected, records kept", records.len()));
    }
    Ok(SweepResult {
        kind: SweepKind::Upper,
        label: cfg.label(),
        n: cfg.n,
        lambda1: spectral.as_ref().map(|s| s.lambda1),
        lambda1_error: spectral.as_ref().map(|s| s.lambda1_error),
        alpha,
        tolerance: tol,
        verdict: Verdict::combine(checks.iter().map(|c| c.verdict)),
        records,
        checks,
        notes,
    })
}

/// Odd `λ₁` mode matched to the boundary data, with its reflection axis.
struct OddMode {
    axis: usize,
    mode: Vec<f64>,
    /// `⟨φ, Y⟩_a / ‖φ‖_a`.
    share: f64,
}

fn odd_mode(cfg: &ExperimentConfig, w: &Weight, phi_for: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<OddMode> {
    let basis = solve_spectrum(w, 4)?;
    let axes: Vec<usize> = match cfg.boundary {
        BoundarySelector::Coordinate { j } => vec![j],
        _ => vec![1, 2],
    };
    let mut last_err = None;
    let mut fallback = None;
    for axis in axes {
        let report = match classify_parity(&basis, axis) {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let Some(k) = report.lambda1_odd else {
            last_err = Some(GapError::Inapplicable(format!(
                "the lambda_1 eigenspace has no function odd in x_{axis}"
            )));
            continue;
        };
        let mut mode = report.functions[k].clone();
        let phi = phi_for(&mode)?;
        let norm = weighted_inner(&phi, &phi, w)?.sqrt();
        let mut share = if norm > 0.0 { weighted_inner(&phi, &mode, w)? / norm } else { 0.0 };
        if share < 0.0 {
            mode.iter_mut().for_each(|v| *v = -*v);
            share = -share;
        }
        if share > MIN_ODD_SHARE {
            return Ok(OddMode { axis, mode, share });
        }
        fallback.get_or_insert(OddMode { axis, mode, share });
    }
    fallback.ok_or_else(|| last_err.unwrap_or_else(|| GapError::Inapplicable("no odd lambda_1 mode".into())))
}

/// Lower-bound pipeline: the odd `λ₁` component `U₁(√ε)` and the gradient
/// near `|x′| = √ε`.
pub fn run_lower_pipeline(cfg: &ExperimentConfig, workers: usize) -> std::result::Result<SweepResult, PartialSweep> {
    let early = |error| PartialSweep {
        records: Vec::new(),
        error,
    };
    cfg.validate().map_err(early)?;
    if cfg.n != 3 {
        return Err(early(GapError::usage("the lower-bound pipeline runs in dimension 3")));
    }
    let tol = cfg.tolerances.exponent;
    let spectral = predict(cfg).map_err(early)?;
    let nt = cfg.grid.n_theta;
    let w = boundary_weight(cfg, nt).map_err(early)?;
    let odd = odd_mode(cfg, &w, &|mode| cfg.boundary_samples(nt, mode)).map_err(early)?;
    let phi = cfg.boundary_samples(nt, &odd.mode).map_err(early)?;
    let grid = cfg.disk_grid().map_err(early)?;
    let records = run_points(cfg, workers, |eps| {
        let field = solve_reduced(&w, eps, &grid, &phi, &Forcing::zero(), cfg.tolerances.solver)?;
        let mut rec = reduced_record(&field, eps)?;
        rec.amplitude = Some(profile_at(&project_mode(&field, &odd.mode)?, eps.sqrt()));
        Ok(rec)
    })?;
    let mut notes = vec![format!(
        "odd mode in x_{}; boundary share along it {:.6e}",
        odd.axis, odd.share
    )];
    let alpha = spectral.alpha;
    let mut checks = Vec::new();
    if odd.share <= MIN_ODD_SHARE {
        notes.push("boundary data has no odd lambda_1 component: U1 vanishes identically".into());
        checks.push(Check {
            name: "parity".into(),
            predicted: None,
            measured: Some(odd.share),
            halfwidth: None,
            r_squared: None,
            verdict: Verdict::Inapplicable,
            detail: format!("odd share must exceed {MIN_ODD_SHARE}"),
        });
    } else {
        let amps: Vec<f64> = records.iter().filter_map(|r| r.amplitude).collect();
        let min_amp = amps.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "amplitude_positive".into(),
            predicted: None,
            measured: Some(min_amp),
            halfwidth: None,
            r_squared: None,
            verdict: if min_amp > 0.0 { Verdict::Pass } else { Verdict::Fail },
            detail: "U1(sqrt eps) > 0 at every eps".into(),
        });
        let series = |f: &dyn Fn(&SweepRecord) -> Option<f64>| -> Vec<(f64, f64)> {
            records.iter().filter_map(|r| f(r).map(|v| (r.epsilon, v))).collect()
        };
        if min_amp > 0.0 {
            checks.push(Check::slope("amplitude", &series(&|r| r.amplitude), alpha / 2.0, tol));
        }
        checks.push(Check::slope("witness", &series(&|r| r.witness), gradient_exponent(alpha), tol));
    }
    if records.len() < MIN_FIT_POINTS {
        notes.push(format!("{} eps values: fits rejected, records kept", records.len()));
    }
    Ok(SweepResult {
        kind: SweepKind::Lower,
        label: cfg.label(),
        n: 3,
        lambda1: Some(spectral.lambda1),
        lambda1_error: Some(spectral.lambda1_error),
        alpha,
        tolerance: tol,
        verdict: Verdict::combine(checks.iter().map(|c| c.verdict)),
        records,
        checks,
        notes,
    })
}
