//! Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use gaplab::exponents::{alpha_of, ball_beta};
use gaplab::gapfull::{average_vertical, averaged_residual, map_strip, solve_gap, StripSizes, VerticalAverage};
use gaplab::geometry::{build_weight, GapGeometry};
use gaplab::harness::config::{BoundarySelector, ExperimentConfig};
use gaplab::harness::sweep::{run_lower_pipeline, run_upper_sweep, SweepResult, Verdict};
use gaplab::harness::fit_exponent;
use gaplab::radialode::{geometric_grid, reduction_of_order, RadialFunction};
use gaplab::reduced::{barrier_check, solve_reduced, DiskGrid, Forcing};
use gaplab::spectral::{solve_spectrum, solve_spectrum_with, weighted_inner, SpectrumOptions};
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    hessian: Vec<f64>,
    lambda1: f64,
    error: f64,
}

fn golden() -> Golden {
    serde_json::from_str(include_str!("data/golden_lambda1.json")).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let geom = GapGeometry::ball(3, 1e-2).unwrap();
    let b = solve_spectrum(&build_weight(&geom, 1024).unwrap(), 4).unwrap();
    let lam = b.lambda1().unwrap();
    let alpha = alpha_of(1.0, 3).unwrap();
    let rate = (alpha - 1.0) / 2.0;
    let pass = (lam - 1.0).abs() < 1e-6
        && (alpha - (2f64.sqrt() - 1.0)).abs() < 1e-12
        && (rate + 0.2928932).abs() < 1e-7;
    outcome(pass, format!("lambda1 = {lam:.10}, alpha = {alpha:.12}, rate = {rate:.7}"))
}

fn criterion_2() -> Outcome {
    let geom = GapGeometry::ball(4, 1e-2).unwrap();
    let b = solve_spectrum(&build_weight(&geom, 192).unwrap(), 5).unwrap();
    let space = b.lambda1_space().unwrap();
    let pass = (space.value - 2.0).abs() < 1e-4 && space.multiplicity() == 3;
    outcome(
        pass,
        format!("lambda1 = {:.8} with multiplicity {}", space.value, space.multiplicity()),
    )
}

fn criterion_3() -> Outcome {
    let worst = (3..=10)
        .map(|n| {
            let lhs = -0.5 + ball_beta(n).unwrap();
            let rhs = (alpha_of((n - 2) as f64, n).unwrap() - 1.0) / 2.0;
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max);
    outcome(worst <= 1e-14, format!("max identity gap {worst:.2e} over n = 3..10"))
}

fn criterion_4() -> Outcome {
    let g = golden();
    let geom = GapGeometry::diagonal(1e-2, &[g.hessian[0], g.hessian[3]]).unwrap();
    let opts = SpectrumOptions {
        refine: false,
        ..Default::default()
    };
    let lam: Vec<f64> = [2048, 4096]
        .iter()
        .map(|&n| {
            solve_spectrum_with(&build_weight(&geom, n).unwrap(), 4, opts)
                .unwrap()
                .lambda1()
                .unwrap()
        })
        .collect();
    let rel = (lam[0] - lam[1]).abs() / lam[1];
    let extrapolated = (4.0 * lam[1] - lam[0]) / 3.0;
    let matches_golden = (extrapolated - g.lambda1).abs() <= g.error;
    let pass = rel < 1e-6 && lam[1] <= 1.0 && matches_golden;
    outcome(
        pass,
        format!(
            "lambda1(2048) = {:.12}, lambda1(4096) = {:.12}, rel {rel:.2e}; extrapolated {extrapolated:.13} vs golden {:.12} +/- {:.1e}",
            lam[0], lam[1], g.lambda1, g.error
        ),
    )
}

fn criterion_5() -> Outcome {
    let geom = GapGeometry::diagonal(1e-2, &[1.0, 4.0]).unwrap();
    let w = build_weight(&geom, 64).unwrap();
    let b = solve_spectrum(&w, 4).unwrap();
    let alpha = alpha_of(b.lambda1().unwrap(), 3).unwrap();
    let grid = DiskGrid::geometric(1.0, 300, 64, 1.04).unwrap();
    // the offset makes the ring-mean check nontrivial; ω subtracts it
    let offset = 0.3;
    let phi: Vec<f64> = b.y1().unwrap().iter().map(|v| v + offset).collect();
    let field = solve_reduced(&w, 0.0, &grid, &phi, &Forcing::zero(), 1e-12).unwrap();
    let omega = field.omega_profile();
    let fit = fit_exponent(&omega.window(0.05, 0.5)).unwrap();
    let mean_dev = (0..grid.n_r())
        .map(|i| (field.ring_mean(i) - offset).abs())
        .fold(0.0, f64::max);
    let pass = (fit.slope - alpha).abs() <= 0.02 && mean_dev <= 1e-6;
    outcome(
        pass,
        format!(
            "omega slope {:.4} vs alpha {alpha:.4}; ring-mean spread {mean_dev:.1e}",
            fit.slope
        ),
    )
}

fn describe(res: &SweepResult) -> String {
    res.checks
        .iter()
        .map(|c| match (c.measured, c.predicted) {
            (Some(m), Some(p)) => format!("{} {m:.4} vs {p:.4}", c.name),
            (Some(m), None) => format!("{} {m:.3e}", c.name),
            _ => format!("{} {}", c.name, c.verdict.as_str()),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn sweep_criterion(lower: bool) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [[1.0, 1.0], [1.0, 4.0]] {
        let cfg = ExperimentConfig::diagonal(m);
        let res = if lower {
            run_lower_pipeline(&cfg, 4)
        } else {
            run_upper_sweep(&cfg, 4)
        }
        .unwrap();
        pass &= res.verdict == Verdict::Pass && res.records.len() == 5;
        parts.push(format!("M = diag{m:?}: {}", describe(&res)));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let text = r#"{
        "schema_version": 1, "n": 2,
        "geometry": {"hessian": [1.0]},
        "boundary": {"kind": "coordinate", "j": 1},
        "gap": {"lateral": 200, "vertical": 16, "stretch": 6.0}
    }"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    let res = run_upper_sweep(&cfg, 4).unwrap();
    let slope = res.check("max_gradient").unwrap().measured.unwrap();
    let pass = res.verdict == Verdict::Pass && (slope + 0.5).abs() <= 0.05;
    outcome(pass, format!("max-gradient slope {slope:.4} vs -0.5"))
}

fn criterion_9() -> Outcome {
    let eps = 1e-2;
    let geom = GapGeometry::ball(3, eps).unwrap();
    let rho = 1.0;
    let coarse = map_strip(
        &geom,
        rho,
        StripSizes {
            lateral: 48,
            n_theta: 32,
            vertical: 8,
            stretch: 4.0,
        },
    )
    .unwrap();
    let fine = coarse.refined().unwrap();
    let mut residuals = Vec::new();
    let mut worst_rel = 0.0_f64;
    for strip in [&coarse, &fine] {
        let nt = strip.sizes().n_theta;
        let w = build_weight(&geom, nt).unwrap();
        let phi = solve_spectrum(&w, 4).unwrap().y1().unwrap().to_vec();
        let sol = solve_gap(strip, &phi, 1e-10).unwrap();
        let VerticalAverage::Disk(ubar) = average_vertical(&sol, Some(&w)).unwrap() else {
            unreachable!("n = 3 averages live on a disk");
        };
        let grid = strip.disk().unwrap();
        let red = solve_reduced(&w, eps, grid, &phi, &Forcing::zero(), 1e-11).unwrap();
        let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
        for i in 0..grid.n_r() {
            let r = grid.centers()[i];
            if r < 2.0 * eps.sqrt() || r > rho / 2.0 {
                continue;
            }
            for j in 0..nt {
                diff = diff.max((ubar.value(i, j) - red.value(i, j)).abs());
                scale = scale.max(red.value(i, j).abs());
            }
        }
        worst_rel = worst_rel.max(diff / scale);
        residuals.push(averaged_residual(&sol, 0.05, rho / 2.0).unwrap().max_residual);
    }
    let ratio = residuals[0] / residuals[1];
    let pass = worst_rel <= 0.10 && (2.5..=6.0).contains(&ratio);
    outcome(
        pass,
        format!("max relative gap in ubar {worst_rel:.4}; residual ratio {ratio:.3} ({:.2e} -> {:.2e})", residuals[0], residuals[1]),
    )
}

fn criterion_10() -> Outcome {
    let n = 3;
    let lam = golden().lambda1;
    let alpha = alpha_of(lam, n).unwrap();
    let r = geometric_grid(1e-5, 1.0, 2000);
    let h = RadialFunction::sample(r.clone(), |x| x.powf(1.0 + alpha)).unwrap();
    let red = reduction_of_order(&h, lam, n).unwrap();
    let den = n as f64 + 2.0 * alpha;
    let m = r.len() / 10;
    let err = (m..r.len() - m)
        .map(|i| {
            let want = r[i].powf(1.0 + alpha) / den;
            (red.v.values()[i] - want).abs() / want
        })
        .fold(0.0, f64::max);
    let h2 = RadialFunction::sample(r.clone(), |x| x.powf(1.0 + alpha) * (1.0 - 2.0 * x)).unwrap();
    let v2 = reduction_of_order(&h2, lam, n).unwrap().v;
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(v2.values())
        .filter(|(x, _)| **x <= 0.01)
        .map(|(x, v)| (*x, v.abs()))
        .collect();
    let slope = fit_exponent(&pts).unwrap().slope;
    let pass = err <= 1e-8 && slope >= 1.0 + alpha - 0.05;
    outcome(
        pass,
        format!("closed-form error {err:.2e}; remainder slope {slope:.4} vs 1+alpha = {:.4}", 1.0 + alpha),
    )
}

fn criterion_11() -> Outcome {
    let mut fails = Vec::new();
    // discrete maximum principle, reduced and full
    let geom = GapGeometry::diagonal(1e-3, &[1.0, 4.0]).unwrap();
    let w = build_weight(&geom, 64).unwrap();
    let grid = DiskGrid::geometric(1.0, 200, 64, 1.04).unwrap();
    let data: Vec<f64> = grid.thetas().iter().map(|t| (3.0 * t).cos() + 0.4 * t.sin()).collect();
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let f = solve_reduced(&w, 1e-3, &grid, &data, &Forcing::zero(), 1e-12).unwrap();
    if !f.values.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12) {
        fails.push("reduced maximum principle");
    }
    let strip = map_strip(
        &geom,
        0.5,
        StripSizes {
            lateral: 16,
            n_theta: 16,
            vertical: 6,
            stretch: 3.0,
        },
    )
    .unwrap();
    let phi: Vec<f64> = (0..16).map(|j| (2.0 * PI * j as f64 / 16.0).sin()).collect();
    let sol = solve_gap(&strip, &phi, 1e-13).unwrap();
    if !sol.values.iter().all(|v| v.abs() <= 1.0 + 1e-12) {
        fails.push("gap maximum principle");
    }
    // oddness under x_2 → −x_2
    let nz = strip.levels().len();
    let odd = (0..sol.values.len() / nz).all(|l| {
        let p = strip.lateral_point(l);
        let mirror = (0..sol.values.len() / nz).find(|&m| {
            let q = strip.lateral_point(m);
            (q[0] - p[0]).abs() < 1e-12 && (q[1] + p[1]).abs() < 1e-12
        });
        mirror.is_some_and(|m| (0..nz).all(|k| (sol.value(l, k) + sol.value(m, k)).abs() < 1e-10))
    });
    if !odd {
        fails.push("gap oddness");
    }
    // weighted orthonormality
    let b = solve_spectrum(&w, 6).unwrap();
    let mut ortho = 0.0_f64;
    for (i, u) in b.eigenfunctions.iter().enumerate() {
        for (j, v) in b.eigenfunctions.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((weighted_inner(u, v, &b.weight).unwrap() - want).abs());
        }
    }
    if ortho > 1e-8 {
        fails.push("weighted orthonormality");
    }
    // barrier at α̃ = α + 0.2
    let alpha = alpha_of(b.lambda1().unwrap(), 3).unwrap();
    for eps in [1e-3, 1e-5] {
        let grid = DiskGrid::geometric(1.0, 300, 64, 1.04).unwrap();
        if !barrier_check(&w, eps, alpha + 0.2, &grid).unwrap().pass {
            fails.push("barrier");
        }
    }
    // determinism and worker invariance
    let mut cfg = ExperimentConfig::diagonal([1.0, 4.0]);
    cfg.boundary = BoundarySelector::Coordinate { j: 2 };
    let one = serde_json::to_string(&run_lower_pipeline(&cfg, 1).unwrap()).unwrap();
    let many = serde_json::to_string(&run_lower_pipeline(&cfg, 4).unwrap()).unwrap();
    let again = serde_json::to_string(&run_lower_pipeline(&cfg, 4).unwrap()).unwrap();
    if one != many || many != again {
        fails.push("determinism");
    }
    outcome(
        fails.is_empty(),
        if fails.is_empty() {
            format!("orthonormality defect {ortho:.1e}; all properties hold")
        } else {
            format!("failed: {}", fails.join(", "))
        },
    )
}

#[test]
fn acceptance() {
    type Criterion = (usize, Duration, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, Duration::from_secs(5), criterion_1),
        (2, Duration::from_secs(60), criterion_2),
        (3, Duration::from_secs(1), criterion_3),
        (4, Duration::from_secs(60), criterion_4),
        (5, Duration::from_secs(60), criterion_5),
        (6, Duration::from_secs(600), || sweep_criterion(false)),
        (7, Duration::from_secs(600), || sweep_criterion(true)),
        (8, Duration::from_secs(300), criterion_8),
        (9, Duration::from_secs(900), criterion_9),
        (10, Duration::from_secs(1), criterion_10),
        (11, Duration::from_secs(300), criterion_11),
    ];
    let mut failed = Vec::new();
    for (k, budget, run) in criteria {
        let t = Instant::now();
        let o = run();
        let took = t.elapsed();
        let pass = o.pass && took <= budget;
        println!(
            "criterion {k:>2}: {} ({}; {:.2} s of {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(k);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
